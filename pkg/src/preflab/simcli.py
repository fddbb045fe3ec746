"""Headless study runner: the (environment x annotator x seed) matrix.

Runs one simulated-annotator session per matrix cell, normalizes final
returns so each environment's interquartile range spans [0, 1], and emits
CSV records, a summary table, pairwise significance tests, and the
preferences-vs-return Pareto data. Cells are independent and fully
seeded, so reruns are byte-identical and cells can execute in a process
pool.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .decision_makers import DmConfig, SessionResult, run_dm_session
from .session import SessionConfig
from .stats import normalize_iqr, paired_t, welch_t  # noqa: F401  (re-exported API)

DM_KINDS = ("pairwise", "groupwise", "interactive")
DEFAULT_ENVS = ("gridworld", "mountaincar")

CSV_HEADER = "env,dm,seed,final_return,normalized_return,comparisons,preferences,errors"


@dataclass(frozen=True)
class ExperimentMatrix:
    envs: tuple[str, ...] = DEFAULT_ENVS
    dm_kinds: tuple[str, ...] = DM_KINDS
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    comparison_budget: int = 400
    rounds: int = 8
    behaviors_per_round: int = 150
    noise_std: float | None = None  # None: 10% of each round's return range
    fixed_preference_budget: int | None = None

    def __post_init__(self):
        if not self.envs or not self.dm_kinds or not self.seeds:
            raise ValueError("matrix axes must be nonempty")

    def cells(self):
        for env in self.envs:
            for dm in self.dm_kinds:
                for seed in self.seeds:
                    yield env, dm, seed


@dataclass
class RunRecord:
    env: str
    dm: str
    seed: int
    final_true_return: float
    normalized_return: float
    comparisons_made: int
    preferences_generated: int
    decision_errors: int
    per_round_curve: list[float] = field(default_factory=list)
    error: str | None = None

    def csv_row(self) -> str:
        return (
            f"{self.env},{self.dm},{self.seed},{self.final_true_return!r},"
            f"{self.normalized_return!r},{self.comparisons_made},"
            f"{self.preferences_generated},{self.decision_errors}"
        )


def _cell_seed(env: str, dm: str, seed: int) -> int:
    import zlib

    return zlib.crc32(f"{env}:{dm}:{seed}".encode())


def run_cell(
    env: str, dm: str, seed: int, matrix: ExperimentMatrix
) -> SessionResult:
    cell_seed = _cell_seed(env, dm, seed)
    session_config = SessionConfig(
        env=env,
        rounds=matrix.rounds,
        behaviors_per_round=matrix.behaviors_per_round,
        preference_budget=matrix.fixed_preference_budget,
        seed=cell_seed,
    )
    dm_config = DmConfig(
        kind=dm,
        noise_std=matrix.noise_std,
        comparison_budget=matrix.comparison_budget,
        seed=cell_seed,
    )
    return run_dm_session(dm_config, session_config)


def _run_cell_tuple(args) -> tuple[str, str, int, SessionResult | None, str | None]:
    env, dm, seed, matrix = args
    try:
        return env, dm, seed, run_cell(env, dm, seed, matrix), None
    except Exception as exc:  # record the failure, keep the matrix going
        return env, dm, seed, None, f"{type(exc).__name__}: {exc}"


def run_matrix(matrix: ExperimentMatrix, jobs: int = 1, log=None) -> list[RunRecord]:
    """One session per cell; failures are recorded, not raised."""
    work = [(env, dm, seed, matrix) for env, dm, seed in matrix.cells()]
    results = []
    if jobs > 1:
        # spawn, not fork: the numba runtime in the parent is not fork-safe
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
            for out in pool.map(_run_cell_tuple, work):
                results.append(out)
                if log:
                    log(out)
    else:
        for item in work:
            out = _run_cell_tuple(item)
            results.append(out)
            if log:
                log(out)

    records = []
    for env, dm, seed, res, err in results:
        if res is None:
            records.append(
                RunRecord(env, dm, seed, float("nan"), float("nan"), 0, 0, 0, [], error=err)
            )
        else:
            records.append(
                RunRecord(
                    env=env,
                    dm=dm,
                    seed=seed,
                    final_true_return=res.final_true_return,
                    normalized_return=float("nan"),
                    comparisons_made=res.comparisons_made,
                    preferences_generated=res.preferences_generated,
                    decision_errors=res.decision_errors,
                    per_round_curve=res.per_round_returns,
                )
            )
    return attach_normalized_returns(records)


def attach_normalized_returns(records: list[RunRecord]) -> list[RunRecord]:
    """Per-environment IQR normalization so annotators are comparable."""
    for env in sorted({r.env for r in records}):
        group = [r for r in records if r.env == env and np.isfinite(r.final_true_return)]
        if len(group) < 4:
            continue
        values = [r.final_true_return for r in group]
        try:
            normed = normalize_iqr(values)
        except ValueError:
            continue
        for rec, nv in zip(group, normed):
            rec.normalized_return = float(nv)
    return records


def records_csv(records: list[RunRecord]) -> str:
    lines = [CSV_HEADER]
    lines += [r.csv_row() for r in records]
    return "\n".join(lines) + "\n"


def summarize(records: list[RunRecord]) -> dict:
    """Per-annotator means plus the three pairwise significance tests."""
    ok = [r for r in records if np.isfinite(r.normalized_return)]
    by_dm = {dm: [r for r in ok if r.dm == dm] for dm in sorted({r.dm for r in ok})}
    summary = {
        "per_dm": {
            dm: {
                "mean_normalized_return": float(
                    np.mean([r.normalized_return for r in group])
                ),
                "mean_preferences": float(
                    np.mean([r.preferences_generated for r in group])
                ),
                "mean_comparisons": float(np.mean([r.comparisons_made for r in group])),
                "mean_errors": float(np.mean([r.decision_errors for r in group])),
                "runs": len(group),
            }
            for dm, group in by_dm.items()
        },
        "tests": {},
    }

    def versus(a: str, b: str, key):
        if a in by_dm and b in by_dm and len(by_dm[a]) >= 2 and len(by_dm[b]) >= 2:
            t, p = welch_t([key(r) for r in by_dm[a]], [key(r) for r in by_dm[b]])
            return {"t": t, "p": p}
        return None

    for a, b in (
        ("interactive", "pairwise"),
        ("groupwise", "pairwise"),
        ("interactive", "groupwise"),
    ):
        summary["tests"][f"{a}_vs_{b}_return"] = versus(a, b, lambda r: r.normalized_return)
        summary["tests"][f"{a}_vs_{b}_preferences"] = versus(
            a, b, lambda r: float(r.preferences_generated)
        )
    return summary


def summary_table(summary: dict) -> str:
    lines = [
        f"{'annotator':<12} {'norm return':>12} {'preferences':>12} "
        f"{'comparisons':>12} {'errors':>8} {'runs':>5}"
    ]
    for dm, row in summary["per_dm"].items():
        lines.append(
            f"{dm:<12} {row['mean_normalized_return']:>12.4f} "
            f"{row['mean_preferences']:>12.1f} {row['mean_comparisons']:>12.1f} "
            f"{row['mean_errors']:>8.1f} {row['runs']:>5d}"
        )
    lines.append("")
    for name, res in summary["tests"].items():
        if res is None:
            continue
        lines.append(f"{name}: t = {res['t']:.4f}, p = {res['p']:.4g}")
    return "\n".join(lines) + "\n"


def pareto_csv(records: list[RunRecord]) -> str:
    lines = ["env,dm,seed,preferences,normalized_return"]
    for r in records:
        if np.isfinite(r.normalized_return):
            lines.append(
                f"{r.env},{r.dm},{r.seed},{r.preferences_generated},{r.normalized_return!r}"
            )
    return "\n".join(lines) + "\n"


def report(records: list[RunRecord], out_dir: str | Path) -> dict:
    """Write records.csv, summary (csv + txt), pareto.csv, curves.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "records.csv").write_text(records_csv(records))
    summary = summarize(records)
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    (out / "summary.txt").write_text(summary_table(summary))
    (out / "pareto.csv").write_text(pareto_csv(records))
    curves = {
        f"{r.env}/{r.dm}/{r.seed}": r.per_round_curve for r in records if r.per_round_curve
    }
    (out / "curves.json").write_text(json.dumps(curves, indent=1, sort_keys=True))
    return summary


def fixed_preference_mode(matrix: ExperimentMatrix, jobs: int = 1, log=None) -> list[RunRecord]:
    """Rerun the matrix with per-session preference budgets capped."""
    if matrix.fixed_preference_budget is None:
        raise ValueError("fixed_preference_budget must be set for the ablation")
    return run_matrix(matrix, jobs=jobs, log=log)


# -- command line ------------------------------------------------------------


def _add_simulate_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--env", nargs="+", default=list(DEFAULT_ENVS), choices=DEFAULT_ENVS)
    parser.add_argument("--dm", nargs="+", default=list(DM_KINDS), choices=DM_KINDS)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    parser.add_argument("--budget", type=int, default=400, help="comparisons per session")
    parser.add_argument("--rounds", type=int, default=8)
    parser.add_argument(
        "--fixed-prefs", type=int, default=None, help="cap preferences per session (ablation)"
    )
    parser.add_argument(
        "--noise-std",
        type=float,
        default=None,
        help="annotator noise sigma; default adapts to 10%% of each round's return range",
    )
    parser.add_argument("--out", type=Path, default=Path("study_out"))
    parser.add_argument("--jobs", type=int, default=1, help="parallel worker processes")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="preflab", description="groupwise preference feedback workbench"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", help="run the annotator study matrix")
    _add_simulate_args(sim)
    serve = sub.add_parser("serve", help="serve the interactive session API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--token", default="dev-token")
    args = parser.parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .api import create_app

        uvicorn.run(create_app(token=args.token), host=args.host, port=args.port)
        return 0

    matrix = ExperimentMatrix(
        envs=tuple(args.env),
        dm_kinds=tuple(args.dm),
        seeds=tuple(args.seeds),
        comparison_budget=args.budget,
        rounds=args.rounds,
        noise_std=args.noise_std,
        fixed_preference_budget=args.fixed_prefs,
    )

    def log(out):
        env, dm, seed, res, err = out
        if err:
            print(f"[fail] {env}/{dm}/{seed}: {err}", file=sys.stderr)
        else:
            print(
                f"[done] {env}/{dm}/{seed}: return={res.final_true_return:.2f} "
                f"prefs={res.preferences_generated} comparisons={res.comparisons_made}"
            )

    records = run_matrix(matrix, jobs=args.jobs, log=log)
    summary = report(records, args.out)
    print(summary_table(summary))
    failures = [r for r in records if r.error]
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
