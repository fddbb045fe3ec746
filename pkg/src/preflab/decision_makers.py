"""Simulated annotators: noisy perception, pair/group verdicts, selection.

A decision maker perceives each segment's hidden true return through
additive Gaussian noise and compares what it perceived. Pairs tie when
the perceived difference falls inside the tie band. Groups are compared
by their mean perceived returns and skipped when the gap is within
``overlap_factor`` pooled within-group standard deviations, i.e. when the
two reward distributions overlap too much to call.

Three selection strategies mirror the study conditions:

* pairwise: answers the single most ensemble-disputed pair,
* groupwise: answers the best variance-ratio group suggestion,
* interactive: ignores the ensemble entirely and picks group pairs by
  their true mean returns, cycling through return quantile strata so the
  answered comparisons spread evenly from worst to best behaviors, and
  preferring internally consistent (low true-return variance) groups.

Noise defaults: sigma is 10% of the current round's true-return range
when not set explicitly; the tie band defaults to sigma / 10.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .behavior_space import Dendrogram
from .envs import Behavior
from .preferences import GroupComparison, _candidate_nodes, _disjoint

DEFAULT_STRATA = 5


@dataclass(frozen=True)
class DmConfig:
    kind: str  # "pairwise" | "groupwise" | "interactive"
    noise_std: float | None = None  # None: 10% of the round's return range
    tie_band: float | None = None  # None: noise_std / 10
    overlap_factor: float = 0.5
    comparison_budget: int = 400
    strata: int = DEFAULT_STRATA
    suggestion_mix: float = 0.0  # interactive only: fraction of answers taken from AL
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("pairwise", "groupwise", "interactive"):
            raise ValueError(f"unknown decision maker kind {self.kind!r}")
        if self.comparison_budget < 1:
            raise ValueError("comparison budget must be >= 1")


@dataclass(frozen=True)
class DmVerdict:
    outcome: str  # "first" | "second" | "tie" | "skip"
    perceived_values: tuple[float, float]


def resolve_noise(config: DmConfig, behaviors: list[Behavior]) -> tuple[float, float]:
    """Concrete (sigma, tie_band) for a round of behaviors."""
    if config.noise_std is not None:
        sigma = config.noise_std
    else:
        returns = [b.true_return for b in behaviors]
        sigma = 0.1 * (max(returns) - min(returns)) if behaviors else 0.0
    band = config.tie_band if config.tie_band is not None else sigma / 10.0
    return sigma, band


def perceive(true_return: float, noise_std: float, rng: np.random.Generator) -> float:
    if noise_std == 0.0:
        return float(true_return)
    return float(true_return + rng.normal(0.0, noise_std))


def decide_pair(
    a: Behavior,
    b: Behavior,
    noise_std: float,
    tie_band: float,
    rng: np.random.Generator,
) -> DmVerdict:
    va = perceive(a.true_return, noise_std, rng)
    vb = perceive(b.true_return, noise_std, rng)
    if abs(va - vb) <= tie_band:
        outcome = "tie"
    else:
        outcome = "first" if va > vb else "second"
    return DmVerdict(outcome=outcome, perceived_values=(va, vb))


def decide_groups(
    g1: list[Behavior],
    g2: list[Behavior],
    noise_std: float,
    overlap_factor: float,
    rng: np.random.Generator,
) -> DmVerdict:
    if not g1 or not g2:
        raise ValueError("groups must be nonempty")
    v1 = np.array([perceive(b.true_return, noise_std, rng) for b in g1])
    v2 = np.array([perceive(b.true_return, noise_std, rng) for b in g2])
    m1, m2 = float(v1.mean()), float(v2.mean())
    pooled = np.sqrt((v1.size * v1.var() + v2.size * v2.var()) / (v1.size + v2.size))
    if abs(m1 - m2) <= overlap_factor * pooled:
        outcome = "skip"
    else:
        outcome = "first" if m1 > m2 else "second"
    return DmVerdict(outcome=outcome, perceived_values=(m1, m2))


def noiseless_pair(a: Behavior, b: Behavior, tie_band: float) -> str:
    d = a.true_return - b.true_return
    if abs(d) <= tie_band:
        return "tie"
    return "first" if d > 0 else "second"


def noiseless_groups(g1: list[Behavior], g2: list[Behavior], overlap_factor: float) -> str:
    v1 = np.array([b.true_return for b in g1])
    v2 = np.array([b.true_return for b in g2])
    m1, m2 = float(v1.mean()), float(v2.mean())
    pooled = np.sqrt((v1.size * v1.var() + v2.size * v2.var()) / (v1.size + v2.size))
    if abs(m1 - m2) <= overlap_factor * pooled:
        return "skip"
    return "first" if m1 > m2 else "second"


class InteractiveSelector:
    """Stratified pair picker spreading comparisons across the return range.

    Candidates are every dendrogram node of <= MAX_GROUP_SIZE leaves,
    single behaviors included, ranked by mean true return and split into
    quantile strata. Call c anchors stratum c mod Q and walks partner
    strata at a cycling offset, taking the first fresh disjoint pair the
    annotator could actually judge (true mean gap above the overlap
    threshold; anything closer would mostly be skipped or decided by
    noise). Within a stratum, coherent groups come first: lowest true
    within-group variance, then smallest, mimicking a careful human who
    compares clean clusters or single clips rather than mixed bags.
    """

    MAX_PICK = 4  # judging the mean of more than a handful is unreliable

    def __init__(
        self,
        strata: int = DEFAULT_STRATA,
        overlap_factor: float = 0.5,
        noise_std: float = 0.0,
    ):
        self.strata = strata
        self.overlap_factor = overlap_factor
        self.noise_std = noise_std
        self.counter = 0

    def select(
        self,
        dend: Dendrogram,
        behaviors: list[Behavior],
        compared: set[frozenset[frozenset[str]]],
    ) -> tuple[int, int]:
        returns = {b.id: b.true_return for b in behaviors}
        stats: dict[int, tuple[float, float, int]] = {}

        def node_stats(nid: int):
            if nid not in stats:
                vals = np.array([returns[bid] for bid in dend.leaves_under(nid)])
                stats[nid] = (float(vals.mean()), float(vals.var()), vals.size)
            return stats[nid]

        def decidable(a: int, b: int) -> bool:
            m1, v1, n1 = node_stats(a)
            m2, v2, n2 = node_stats(b)
            pooled = np.sqrt((n1 * v1 + n2 * v2) / (n1 + n2))
            if abs(m1 - m2) <= self.overlap_factor * pooled:
                return False
            # perceptual floor: group means are observed through per-behavior
            # noise; a gap below one standard error of the perceived gap
            # cannot be ranked better than a coin flip
            sem = self.noise_std * np.sqrt(1.0 / n1 + 1.0 / n2)
            return abs(m1 - m2) > sem

        cands = [
            nid
            for nid in _candidate_nodes(dend, include_leaves=True)
            if dend.nodes[nid].leaf_count <= self.MAX_PICK
        ]
        ordered = sorted(cands, key=lambda nid: (node_stats(nid)[0], nid))
        q = max(1, min(self.strata, len(ordered)))
        strata = [list(chunk) for chunk in np.array_split(ordered, q)]
        for stratum in strata:
            # singles and small clean clusters first; bigger groups are only
            # reached when nothing smaller clears the perceptual floor
            stratum.sort(key=lambda nid: (node_stats(nid)[2], node_stats(nid)[1], nid))

        def is_fresh(a: int, b: int) -> bool:
            if not _disjoint(dend, a, b):
                return False
            key = frozenset((frozenset(dend.leaves_under(a)), frozenset(dend.leaves_under(b))))
            return key not in compared

        def found(a: int, b: int) -> tuple[int, int]:
            self.counter += 1
            return (a, b) if a < b else (b, a)

        anchor = self.counter % q
        if q == 1:
            offsets = [0]
        else:
            start = 1 + (self.counter // q) % (q - 1)
            offsets = [(start - 1 + k) % (q - 1) + 1 for k in range(q - 1)]
        fallback = None
        for off in offsets:
            partner = (anchor + off) % q
            for a in strata[anchor]:
                for b in strata[partner]:
                    if a == b or not is_fresh(a, b):
                        continue
                    if decidable(a, b):
                        return found(a, b)
                    if fallback is None:
                        fallback = (a, b)
        if fallback is not None:
            return found(*fallback)
        # anchor stratum exhausted: any fresh pair, judgeable first
        flat = sorted(nid for stratum in strata for nid in stratum)
        for i in range(len(flat)):
            for j in range(i + 1, len(flat)):
                if is_fresh(flat[i], flat[j]):
                    if decidable(flat[i], flat[j]):
                        return found(flat[i], flat[j])
                    if fallback is None:
                        fallback = (flat[i], flat[j])
        if fallback is not None:
            return found(*fallback)
        raise LookupError("no fresh disjoint group pair left to select")


@dataclass
class SessionResult:
    env: str
    dm: str
    seed: int
    final_true_return: float
    per_round_returns: list[float]
    comparisons_made: int
    preferences_generated: int
    decision_errors: int
    skips: int
    metrics: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        import json

        return json.dumps(
            {
                "env": self.env,
                "dm": self.dm,
                "seed": self.seed,
                "final_true_return": self.final_true_return,
                "per_round_returns": self.per_round_returns,
                "comparisons_made": self.comparisons_made,
                "preferences_generated": self.preferences_generated,
                "decision_errors": self.decision_errors,
                "skips": self.skips,
                "metrics": self.metrics,
            },
            sort_keys=True,
        )


_VERDICT_FOR = {"first": "g1_preferred", "second": "g2_preferred", "skip": "skip", "tie": "tie"}


def run_dm_session(dm_config: DmConfig, session_config) -> SessionResult:
    """A full feedback loop answered by a simulated decision maker.

    Comparisons are split evenly over the session's rounds; skipped group
    comparisons still consume budget. Decision errors count verdicts that
    differ from the noiseless (sigma = 0) verdict on the same items.
    """
    from . import session as orchestration

    state = orchestration.start_session(session_config)
    selector = InteractiveSelector(dm_config.strata, dm_config.overlap_factor)
    # let the annotator's perceptual floor track the per-round noise level
    rng = np.random.default_rng((dm_config.seed, 0xD3))
    mix_rng = np.random.default_rng((dm_config.seed, 0x313))

    budget = dm_config.comparison_budget
    rounds = session_config.rounds
    base_quota = budget // rounds
    extra = budget % rounds

    comparisons = errors = skips = counter = 0
    for rnd in range(rounds):
        quota = base_quota + (1 if rnd < extra else 0)
        sigma, band = resolve_noise(dm_config, state.behaviors)
        selector.noise_std = sigma
        by_id = {b.id: b for b in state.behaviors}
        for _ in range(quota):
            try:
                if dm_config.kind == "pairwise":
                    a_id, b_id = orchestration.serve_suggestion(state, "pair")
                    g1, g2 = (a_id,), (b_id,)
                elif dm_config.kind == "groupwise":
                    sug = orchestration.serve_suggestion(state, "group")
                    g1, g2 = sug.leaves_1, sug.leaves_2
                else:
                    if dm_config.suggestion_mix > 0 and mix_rng.random() < dm_config.suggestion_mix:
                        sug = orchestration.serve_suggestion(state, "group")
                        g1, g2 = sug.leaves_1, sug.leaves_2
                    else:
                        n1, n2 = selector.select(
                            state.dendrogram,
                            state.behaviors,
                            state.store.compared_group_pairs(),
                        )
                        g1 = tuple(state.dendrogram.leaves_under(n1))
                        g2 = tuple(state.dendrogram.leaves_under(n2))
            except LookupError:
                break

            b1 = [by_id[x] for x in g1]
            b2 = [by_id[x] for x in g2]
            if dm_config.kind == "pairwise":
                verdict = decide_pair(b1[0], b2[0], sigma, band, rng)
                truth = noiseless_pair(b1[0], b2[0], band)
            else:
                verdict = decide_groups(b1, b2, sigma, dm_config.overlap_factor, rng)
                truth = noiseless_groups(b1, b2, dm_config.overlap_factor)
            if verdict.outcome != truth:
                errors += 1
            if verdict.outcome == "skip":
                skips += 1
            comparisons += 1
            orchestration.submit_comparison(
                state,
                GroupComparison(
                    id=f"c{counter:05d}",
                    group_1=g1,
                    group_2=g2,
                    verdict=_VERDICT_FOR[verdict.outcome],
                    origin="dm",
                    round_index=rnd,
                ),
            )
            counter += 1
        orchestration.advance_round(state)

    per_round = [m["true_return_mean"] for m in state.metrics]
    return SessionResult(
        env=session_config.env,
        dm=dm_config.kind,
        seed=dm_config.seed,
        final_true_return=per_round[-1],
        per_round_returns=per_round,
        comparisons_made=comparisons,
        preferences_generated=len(state.store.queries()),
        decision_errors=errors,
        skips=skips,
        metrics=state.metrics,
    )
