"""Round-based feedback session tying all the pieces together.

One round: fresh segments are sampled from the current policy, clustered
into a dendrogram, and served for comparison; submitted verdicts expand
into preference queries; advancing the round retrains the reward ensemble
from scratch on every accumulated query, trains the policy against the
ensemble's mean step reward, evaluates it on true rewards with fresh
seeds, and collects the next round's behaviors.

The ensemble's mean step reward is the only reward signal handed to the
policy trainer; nothing in this module passes true rewards into training.
All per-round randomness derives from (session seed, round, purpose)
tuples, so sessions are reproducible and snapshots resume exactly.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import envs, layout
from .behavior_space import Dendrogram, agglomerative_cluster, distance_matrix
from .envs import Behavior, EnvSpec
from .policy import Policy, PolicyConfig, evaluate_policy, init_policy, train_policy
from .policy import load_policy, save_policy
from .preferences import (
    GroupComparison,
    GroupSuggestion,
    PreferenceStore,
    generate_labels,
    rank_group_suggestions,
    suggest_pair,
)
from .reward_ensemble import (
    Ensemble,
    RewardNetConfig,
    init_ensemble,
    load_ensemble,
    mean_step_reward,
    save_ensemble,
    train,
)

PHASES = ("idle", "collecting_feedback", "training", "finished")

DEFAULT_SEGMENT_LEN = {"gridworld": 12, "mountaincar": 25}
MIN_COLLECT_EPISODES = 20


@dataclass(frozen=True)
class SessionConfig:
    env: str
    behaviors_per_round: int = 150
    segment_len: int | None = None  # None: per-environment default
    rounds: int = 8
    episode_len: int | None = None
    eval_episodes: int = 20
    label_mode: str = "max"
    preference_budget: int | None = None
    collect_episode_cap: int = 4000
    seed: int = 0
    reward: RewardNetConfig | None = None
    policy: PolicyConfig | None = None

    def __post_init__(self):
        if self.behaviors_per_round < 2:
            raise ValueError("behaviors_per_round must be >= 2")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        envs.spec_by_name(self.env)

    def resolved_segment_len(self) -> int:
        return self.segment_len or DEFAULT_SEGMENT_LEN[self.env]

    def env_spec(self) -> EnvSpec:
        return envs.spec_by_name(self.env, self.episode_len)

    def reward_config(self) -> RewardNetConfig:
        if self.reward is not None:
            return self.reward
        return RewardNetConfig(input_dim=self.env_spec().reward_input_dim, seed=self.seed)

    def policy_config(self) -> PolicyConfig:
        if self.policy is not None:
            return self.policy
        return PolicyConfig(seed=self.seed)


@dataclass
class RoundArchive:
    behaviors: list[Behavior]
    dendrogram: Dendrogram


@dataclass
class SessionState:
    config: SessionConfig
    spec: EnvSpec
    phase: str
    round_index: int
    behaviors: list[Behavior]
    dendrogram: Dendrogram
    ensemble: Ensemble
    policy: Policy
    store: PreferenceStore
    metrics: list[dict] = field(default_factory=list)
    behaviors_by_id: dict[str, Behavior] = field(default_factory=dict)
    archives: dict[int, RoundArchive] = field(default_factory=dict)
    served_pairs: list[tuple[str, str]] = field(default_factory=list)
    served_groups: list[GroupSuggestion] = field(default_factory=list)
    _group_ranking: list[GroupSuggestion] | None = None

    @property
    def behavior_ids(self) -> list[str]:
        return [b.id for b in self.behaviors]


def _collect_behaviors(
    config: SessionConfig, spec: EnvSpec, policy: Policy, round_index: int
) -> list[Behavior]:
    """Roll the current policy until enough distinct segments exist.

    Short episodes (below the segment length) are discarded; if the cap is
    hit first, the round carries however many segments were available.
    """
    seg_len = config.resolved_segment_len()
    target = config.behaviors_per_round
    seed_stream = np.random.SeedSequence((config.seed, round_index, 0xB))
    action = policy.action_fn()
    trajectories, pairs, episodes = [], 0, 0
    for ep_seed in seed_stream.generate_state(config.collect_episode_cap):
        # a pool comfortably larger than the target keeps segments varied
        if pairs >= 2 * target and episodes >= MIN_COLLECT_EPISODES:
            break
        traj = envs.rollout(spec, action, int(ep_seed))
        episodes += 1
        if len(traj) >= seg_len:
            trajectories.append(traj)
            pairs += len(traj) - seg_len + 1
    count = min(target, pairs)
    if count < 2:
        raise RuntimeError(
            f"could not collect enough segments in round {round_index} "
            f"({pairs} candidate segments from {episodes} episodes)"
        )
    sample_seed = int(np.random.SeedSequence((config.seed, round_index, 0x5)).generate_state(1)[0])
    return envs.sample_segments(trajectories, seg_len, count, sample_seed, round_index)


def _cluster(behaviors: list[Behavior]) -> Dendrogram:
    return agglomerative_cluster(distance_matrix(behaviors))


def start_session(config: SessionConfig) -> SessionState:
    spec = config.env_spec()
    policy = init_policy(spec, config.policy_config(), seed=config.seed)
    ensemble = init_ensemble(config.reward_config())
    behaviors = _collect_behaviors(config, spec, policy, round_index=0)
    dend = _cluster(behaviors)
    state = SessionState(
        config=config,
        spec=spec,
        phase="collecting_feedback",
        round_index=0,
        behaviors=behaviors,
        dendrogram=dend,
        ensemble=ensemble,
        policy=policy,
        store=PreferenceStore(
            seed=config.seed,
            label_mode=config.label_mode,
            preference_budget=config.preference_budget,
        ),
    )
    state.behaviors_by_id = {b.id: b for b in behaviors}
    state.archives[0] = RoundArchive(behaviors, dend)
    return state


def submit_comparison(state: SessionState, comparison: GroupComparison) -> int:
    """Record a verdict over current-round behaviors; returns queries added."""
    if state.phase != "collecting_feedback":
        raise RuntimeError(f"cannot submit comparisons in phase {state.phase!r}")
    current = set(state.behavior_ids)
    stale = (set(comparison.group_1) | set(comparison.group_2)) - current
    if stale:
        raise ValueError(f"behaviors not in the current round: {sorted(stale)}")
    return len(state.store.record(comparison))


def serve_suggestion(state: SessionState, mode: str):
    """Next fresh suggestion for the UI or a simulated annotator.

    mode="pair" returns (id_a, id_b); mode="group" returns a
    GroupSuggestion. Each call serves a suggestion not previously served
    or answered this round; raises LookupError when exhausted.
    """
    if state.phase != "collecting_feedback":
        raise RuntimeError(f"no suggestions in phase {state.phase!r}")
    if mode == "pair":
        exclude = state.store.compared_singleton_pairs()
        exclude |= {frozenset(p) for p in state.served_pairs}
        pair = suggest_pair(state.ensemble, state.behaviors, exclude)
        state.served_pairs.append(pair)
        return pair
    if mode != "group":
        raise ValueError(f"unknown suggestion mode {mode!r}")
    if state._group_ranking is None:
        state._group_ranking = rank_group_suggestions(
            state.ensemble,
            state.dendrogram,
            state.behaviors,
            compared=state.store.compared_group_pairs(),
            seed=state.config.seed,
        )
    compared = state.store.compared_group_pairs()
    served = {
        frozenset((frozenset(s.leaves_1), frozenset(s.leaves_2))) for s in state.served_groups
    }
    for sug in state._group_ranking:
        key = frozenset((frozenset(sug.leaves_1), frozenset(sug.leaves_2)))
        if key in compared or key in served:
            continue
        state.served_groups.append(sug)
        return sug
    raise LookupError("group suggestions exhausted for this round")


def _suggestion_edges(state: SessionState) -> list[tuple[str, str]]:
    """Leaf pairs for live (served, unanswered) suggestions."""
    compared = state.store.compared_group_pairs()
    edges = []
    for a, b in state.served_pairs:
        if frozenset((frozenset((a,)), frozenset((b,)))) not in compared:
            edges.append((a, b))
    for sug in state.served_groups:
        key = frozenset((frozenset(sug.leaves_1), frozenset(sug.leaves_2)))
        if key in compared:
            continue
        g1, g2 = sorted(sug.leaves_1), sorted(sug.leaves_2)
        bigger, smaller = (g1, g2) if len(g1) >= len(g2) else (g2, g1)
        for t, member in enumerate(bigger):
            edges.append((member, smaller[t % len(smaller)]))
    return edges


_VERDICT_EDGE = {"i_preferred": "first", "j_preferred": "second", "tie": "tie"}


def _history_edges(state: SessionState) -> list[tuple[str, str, str]]:
    """Leaf pair + verdict triples for all current-round history."""
    edges = []
    current_ids = {c.id for c in state.store.history(state.round_index)}
    for q in state.store.queries():
        if q.source_comparison in current_ids:
            edges.append((q.tau_i, q.tau_j, _VERDICT_EDGE[q.outcome]))
    for comp in state.store.history(state.round_index):
        if comp.verdict != "skip":
            continue
        g1, g2 = sorted(comp.group_1), sorted(comp.group_2)
        bigger, smaller = (g1, g2) if len(g1) >= len(g2) else (g2, g1)
        for t, member in enumerate(bigger):
            edges.append((member, smaller[t % len(smaller)], "skip"))
    return edges


def layout_scene(state: SessionState) -> layout.LayoutScene:
    return layout.build_scene(
        state.dendrogram,
        suggestions=_suggestion_edges(state),
        history=_history_edges(state),
    )


def behavior_frames(state: SessionState, behavior_id: str) -> dict:
    behavior = state.behaviors_by_id.get(behavior_id)
    if behavior is None:
        raise KeyError(f"unknown behavior {behavior_id!r}")
    return envs.frames_document(state.spec, behavior)


def advance_round(state: SessionState, progress_cb=None) -> SessionState:
    """Train on accumulated feedback, evaluate, and open the next round."""
    if state.phase != "collecting_feedback":
        raise RuntimeError(f"cannot advance from phase {state.phase!r}")
    config = state.config
    state.phase = "training"
    report = progress_cb or (lambda frac: None)
    report(0.0)
    try:
        queries = state.store.queries()
        ensemble_trained = False
        if queries:
            examples = [
                (
                    state.behaviors_by_id[q.tau_i],
                    state.behaviors_by_id[q.tau_j],
                    {"i_preferred": 1.0, "j_preferred": 0.0, "tie": 0.5}[q.outcome],
                )
                for q in queries
            ]
            fresh = init_ensemble(config.reward_config())
            train(fresh, examples)
            state.ensemble = fresh
            ensemble_trained = True
        report(0.4)

        ensemble = state.ensemble

        def reward_fn(obs, act_enc):
            return mean_step_reward(ensemble, obs, act_enc)

        policy_seed = int(
            np.random.SeedSequence((config.seed, state.round_index, 0xA)).generate_state(1)[0]
        )
        train_stats = train_policy(
            state.policy, state.spec, reward_fn, config.policy_config(), seed=policy_seed
        )
        report(0.8)

        eval_seed = int(
            np.random.SeedSequence((config.seed, state.round_index, 0xE)).generate_state(1)[0]
        )
        mean, std, _ = evaluate_policy(state.policy, state.spec, config.eval_episodes, eval_seed)
        state.metrics.append(
            {
                "round": state.round_index,
                "true_return_mean": mean,
                "true_return_std": std,
                "comparisons": len(state.store.history()),
                "queries": len(queries),
                "ensemble_trained": ensemble_trained,
                "mean_pred_reward": train_stats["mean_pred_reward"],
            }
        )

        state.round_index += 1
        state.served_pairs = []
        state.served_groups = []
        state._group_ranking = None
        if state.round_index >= config.rounds:
            state.phase = "finished"
        else:
            behaviors = _collect_behaviors(config, state.spec, state.policy, state.round_index)
            state.behaviors = behaviors
            state.behaviors_by_id.update({b.id: b for b in behaviors})
            state.dendrogram = _cluster(behaviors)
            state.archives[state.round_index] = RoundArchive(behaviors, state.dendrogram)
            state.phase = "collecting_feedback"
        report(1.0)
    except Exception:
        if state.phase == "training":
            state.phase = "collecting_feedback"
        raise
    return state


# -- persistence -------------------------------------------------------------


def _behavior_doc(b: Behavior) -> dict:
    return {
        "id": b.id,
        "states": b.states.tolist(),
        "actions": b.actions.tolist(),
        "true_return": b.true_return,
        "round_index": b.round_index,
        "source": list(b.source),
    }


def _behavior_from_doc(doc: dict) -> Behavior:
    return Behavior(
        id=doc["id"],
        states=np.asarray(doc["states"], dtype=np.float64),
        actions=np.asarray(doc["actions"], dtype=np.float64),
        true_return=float(doc["true_return"]),
        round_index=int(doc["round_index"]),
        source=(int(doc["source"][0]), int(doc["source"][1])),
    )


def snapshot(state: SessionState, directory: str | Path) -> Path:
    """Persist the session; resume() restores it exactly."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    cfg = asdict(state.config)
    if state.config.reward is not None:
        cfg["reward"]["hidden_layers"] = list(state.config.reward.hidden_layers)
    if state.config.policy is not None:
        cfg["policy"]["hidden_layers"] = list(state.config.policy.hidden_layers)
    (root / "config.json").write_text(json.dumps(cfg, sort_keys=True, indent=1))
    for rnd, archive in state.archives.items():
        rdir = root / "rounds" / f"{rnd:03d}"
        rdir.mkdir(parents=True, exist_ok=True)
        lines = [json.dumps(_behavior_doc(b), sort_keys=True) for b in archive.behaviors]
        (rdir / "behaviors.jsonl").write_text("\n".join(lines) + "\n")
        (rdir / "dendrogram.json").write_text(archive.dendrogram.to_json())
        row = next((m for m in state.metrics if m["round"] == rnd), None)
        (rdir / "metrics.json").write_text(json.dumps(row, sort_keys=True))
    (root / "store.log").write_text(
        "\n".join(state.store.log_lines()) + ("\n" if state.store.log_lines() else "")
    )
    ckpt = root / "checkpoints"
    ckpt.mkdir(exist_ok=True)
    save_ensemble(state.ensemble, ckpt / "ensemble.bin")
    save_policy(state.policy, state.config.policy_config(), ckpt / "policy.bin")
    (root / "state.json").write_text(
        json.dumps(
            {
                "phase": state.phase,
                "round_index": state.round_index,
                "metrics": state.metrics,
                "store": state.store.state(),
                "served_pairs": [list(p) for p in state.served_pairs],
                "served_groups": [
                    {
                        "node_1": s.node_1,
                        "node_2": s.node_2,
                        "score": s.score,
                        "leaves_1": list(s.leaves_1),
                        "leaves_2": list(s.leaves_2),
                    }
                    for s in state.served_groups
                ],
            },
            sort_keys=True,
            indent=1,
        )
    )
    return root


def resume(directory: str | Path) -> SessionState:
    root = Path(directory)
    if not (root / "state.json").exists():
        raise FileNotFoundError(f"no session snapshot at {root}")
    cfg_doc = json.loads((root / "config.json").read_text())
    if cfg_doc.get("reward"):
        cfg_doc["reward"]["hidden_layers"] = tuple(cfg_doc["reward"]["hidden_layers"])
        cfg_doc["reward"] = RewardNetConfig(**cfg_doc["reward"])
    if cfg_doc.get("policy"):
        cfg_doc["policy"]["hidden_layers"] = tuple(cfg_doc["policy"]["hidden_layers"])
        cfg_doc["policy"] = PolicyConfig(**cfg_doc["policy"])
    config = SessionConfig(**cfg_doc)
    spec = config.env_spec()
    meta = json.loads((root / "state.json").read_text())

    archives: dict[int, RoundArchive] = {}
    behaviors_by_id: dict[str, Behavior] = {}
    for rdir in sorted((root / "rounds").glob("[0-9][0-9][0-9]")):
        rnd = int(rdir.name)
        behaviors = [
            _behavior_from_doc(json.loads(line))
            for line in (rdir / "behaviors.jsonl").read_text().splitlines()
            if line.strip()
        ]
        dend = Dendrogram.from_json((rdir / "dendrogram.json").read_text())
        archives[rnd] = RoundArchive(behaviors, dend)
        behaviors_by_id.update({b.id: b for b in behaviors})

    ensemble = load_ensemble(root / "checkpoints" / "ensemble.bin")
    policy, _ = load_policy(root / "checkpoints" / "policy.bin")

    current_round = min(meta["round_index"], max(archives) if archives else 0)
    current = archives[current_round]
    state = SessionState(
        config=config,
        spec=spec,
        phase=meta["phase"],
        round_index=meta["round_index"],
        behaviors=current.behaviors,
        dendrogram=current.dendrogram,
        ensemble=ensemble,
        policy=policy,
        store=PreferenceStore.from_state(meta["store"]),
        metrics=meta["metrics"],
        behaviors_by_id=behaviors_by_id,
        archives=archives,
        served_pairs=[tuple(p) for p in meta["served_pairs"]],
        served_groups=[
            GroupSuggestion(
                node_1=s["node_1"],
                node_2=s["node_2"],
                score=s["score"],
                leaves_1=tuple(s["leaves_1"]),
                leaves_2=tuple(s["leaves_2"]),
            )
            for s in meta["served_groups"]
        ],
    )
    return state
