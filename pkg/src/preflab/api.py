"""HTTP interface the labeling client drives.

Single-user, single-active-session server. All mutating endpoints accept
a client-supplied ``request_id`` and replay the stored response on retry.
Round advancement trains in a background thread; clients poll
``GET /training`` for progress. No response ever carries true returns,
predicted rewards, or ensemble scores; the client is only shown
structure (arcs, edges, ids, counts), never numbers that could anchor
its judgment.
"""

from __future__ import annotations

import threading
from typing import Literal

from fastapi import Depends, FastAPI, Header, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .preferences import GroupComparison
from . import session as orchestration
from .session import SessionConfig

API_PREFIX = "/api/v1"


class SessionCreate(BaseModel):
    env: Literal["gridworld", "mountaincar"]
    behaviors_per_round: int = 150
    segment_len: int | None = None
    rounds: int = 8
    seed: int = 0
    request_id: str | None = None


class ComparisonBody(BaseModel):
    g1: list[str] = Field(min_length=1)
    g2: list[str] = Field(min_length=1)
    verdict: Literal["g1_preferred", "g2_preferred", "skip", "tie"]
    origin: Literal["human", "suggestion_accepted", "dm"] = "human"
    request_id: str | None = None


class AdvanceBody(BaseModel):
    request_id: str | None = None


class _Active:
    def __init__(self, session_id: str, state):
        self.session_id = session_id
        self.state = state
        self.progress = 0.0
        self.training_thread: threading.Thread | None = None
        self.training_error: str | None = None
        self.replays: dict[str, dict] = {}
        self.comparison_count = 0


def create_app(token: str = "dev-token") -> FastAPI:
    app = FastAPI(title="preflab session service", version="1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    holder: dict[str, _Active] = {}
    lock = threading.Lock()
    counter = {"n": 0}

    def auth(authorization: str = Header(default="")) -> None:
        if authorization != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    def active_or_404(session_id: str) -> _Active:
        active = holder.get("active")
        if active is None or active.session_id != session_id:
            raise HTTPException(status_code=404, detail="unknown session")
        return active

    def training_in_progress(active: _Active) -> bool:
        return active.training_thread is not None and active.training_thread.is_alive()

    @app.post(f"{API_PREFIX}/sessions", status_code=201, dependencies=[Depends(auth)])
    def create_session(body: SessionCreate):
        with lock:
            active = holder.get("active")
            if active is not None:
                if body.request_id and body.request_id in active.replays:
                    return active.replays[body.request_id]
                raise HTTPException(status_code=409, detail="a session is already active")
            try:
                config = SessionConfig(
                    env=body.env,
                    behaviors_per_round=body.behaviors_per_round,
                    segment_len=body.segment_len,
                    rounds=body.rounds,
                    seed=body.seed,
                )
                state = orchestration.start_session(config)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            counter["n"] += 1
            session_id = f"s{counter['n']:04d}"
            active = _Active(session_id, state)
            holder["active"] = active
            response = {"session_id": session_id}
            if body.request_id:
                active.replays[body.request_id] = response
            return response

    @app.get(f"{API_PREFIX}/sessions/{{session_id}}/rounds/current", dependencies=[Depends(auth)])
    def current_round(session_id: str):
        active = active_or_404(session_id)
        state = active.state
        return {
            "round_index": state.round_index,
            "phase": state.phase,
            "behavior_ids": state.behavior_ids,
            "metrics_so_far": [
                {"round": m["round"], "comparisons": m["comparisons"], "queries": m["queries"]}
                for m in state.metrics
            ],
        }

    @app.get(f"{API_PREFIX}/sessions/{{session_id}}/layout", dependencies=[Depends(auth)])
    def layout_scene(session_id: str):
        active = active_or_404(session_id)
        return orchestration.layout_scene(active.state).to_payload()

    @app.get(
        f"{API_PREFIX}/sessions/{{session_id}}/behaviors/{{behavior_id}}/frames",
        dependencies=[Depends(auth)],
    )
    def frames(session_id: str, behavior_id: str):
        active = active_or_404(session_id)
        try:
            return orchestration.behavior_frames(active.state, behavior_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown behavior")

    @app.get(f"{API_PREFIX}/sessions/{{session_id}}/suggestions", dependencies=[Depends(auth)])
    def suggestions(session_id: str, mode: Literal["pair", "group"] = "group"):
        active = active_or_404(session_id)
        if training_in_progress(active) or active.state.phase != "collecting_feedback":
            raise HTTPException(status_code=409, detail="not collecting feedback")
        with lock:
            try:
                if mode == "pair":
                    a, b = orchestration.serve_suggestion(active.state, "pair")
                    return {"mode": "pair", "a": a, "b": b}
                sug = orchestration.serve_suggestion(active.state, "group")
                return {
                    "mode": "group",
                    "node_1": sug.node_1,
                    "node_2": sug.node_2,
                    "leaves_1": list(sug.leaves_1),
                    "leaves_2": list(sug.leaves_2),
                }
            except LookupError:
                return Response(status_code=204)

    @app.post(f"{API_PREFIX}/sessions/{{session_id}}/comparisons", dependencies=[Depends(auth)])
    def submit_comparison(session_id: str, body: ComparisonBody):
        active = active_or_404(session_id)
        with lock:
            if body.request_id and body.request_id in active.replays:
                return active.replays[body.request_id]
            if training_in_progress(active):
                raise HTTPException(status_code=409, detail="training in progress")
            try:
                comparison = GroupComparison(
                    id=f"{active.session_id}-c{active.comparison_count:05d}",
                    group_1=tuple(body.g1),
                    group_2=tuple(body.g2),
                    verdict=body.verdict,
                    origin=body.origin,
                    round_index=active.state.round_index,
                )
                generated = orchestration.submit_comparison(active.state, comparison)
            except (ValueError, RuntimeError) as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            active.comparison_count += 1
            response = {"queries_generated": generated, "comparison_id": comparison.id}
            if body.request_id:
                active.replays[body.request_id] = response
            return response

    @app.post(
        f"{API_PREFIX}/sessions/{{session_id}}/rounds/advance",
        status_code=202,
        dependencies=[Depends(auth)],
    )
    def advance(session_id: str, body: AdvanceBody | None = None):
        active = active_or_404(session_id)
        request_id = body.request_id if body else None
        with lock:
            if request_id and request_id in active.replays:
                return active.replays[request_id]
            if training_in_progress(active):
                raise HTTPException(status_code=409, detail="training already in progress")
            if active.state.phase != "collecting_feedback":
                raise HTTPException(
                    status_code=409, detail=f"cannot advance in phase {active.state.phase!r}"
                )
            active.progress = 0.0
            active.training_error = None

            def run():
                try:
                    orchestration.advance_round(
                        active.state, progress_cb=lambda f: setattr(active, "progress", f)
                    )
                except Exception as exc:  # surfaced via GET /training
                    active.training_error = f"{type(exc).__name__}: {exc}"

            active.training_thread = threading.Thread(target=run, daemon=True)
            active.training_thread.start()
            response = {"status": "training"}
            if request_id:
                active.replays[request_id] = response
            return response

    @app.get(f"{API_PREFIX}/sessions/{{session_id}}/training", dependencies=[Depends(auth)])
    def training(session_id: str):
        active = active_or_404(session_id)
        phase = active.state.phase
        if training_in_progress(active):
            phase = "training"
        return {
            "phase": phase,
            "progress": active.progress,
            **({"error": active.training_error} if active.training_error else {}),
        }

    @app.get(f"{API_PREFIX}/spec", dependencies=[Depends(auth)])
    def openapi_spec():
        return app.openapi()

    return app
