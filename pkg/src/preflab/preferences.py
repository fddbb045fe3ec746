"""Comparison store, label generation, and disagreement-driven suggestions.

A group verdict between groups of size m and n expands into exactly
max(m, n) preference queries: the larger group is shuffled and element t
pairs with smaller-group element (t mod min(m, n)), so every member of
both groups appears at least once. Query tau_i always comes from group 1
and tau_j from group 2, regardless of which group is larger. The
cartesian mode (m*n pairs) exists only for the ablation.

Suggestions maximize ensemble disagreement: single pairs by the largest
pairwise disagreement, group pairs by the variance-ratio score
v_inter / (r * v_intra + 1e-8). Group candidates are dendrogram nodes
with at most ``MAX_GROUP_SIZE`` leaves; leaf (singleton) nodes only
become candidates when no fresh pair of internal nodes is left, because
a singleton-vs-singleton pair has zero within-group variance and its
score degenerates to v_inter / 1e-8, which would drown out every real
group pair.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .behavior_space import Dendrogram
from .envs import Behavior
from .reward_ensemble import Ensemble, disagreement_matrix, pair_disagreement

MAX_GROUP_SIZE = 8
SCAN_PAIR_CAP = 20000
SCORE_EPS = 1e-8

VERDICTS = ("g1_preferred", "g2_preferred", "skip", "tie")
ORIGINS = ("human", "suggestion_accepted", "dm")
OUTCOMES = ("i_preferred", "j_preferred", "tie")


@dataclass(frozen=True)
class PreferenceQuery:
    tau_i: str
    tau_j: str
    outcome: str
    source_comparison: str

    def __post_init__(self):
        if self.tau_i == self.tau_j:
            raise ValueError("query endpoints must differ")
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")


@dataclass(frozen=True)
class GroupComparison:
    id: str
    group_1: tuple[str, ...]
    group_2: tuple[str, ...]
    verdict: str
    origin: str
    round_index: int
    ts: float = 0.0

    def __post_init__(self):
        g1, g2 = set(self.group_1), set(self.group_2)
        if not g1 or not g2:
            raise ValueError("groups must be nonempty")
        if g1 & g2:
            raise ValueError("groups must be disjoint")
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "tie" and (len(g1) > 1 or len(g2) > 1):
            raise ValueError("tie verdicts are only defined for single-behavior pairs")
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")


@dataclass(frozen=True)
class GroupSuggestion:
    node_1: int
    node_2: int
    score: float
    leaves_1: tuple[str, ...] = ()
    leaves_2: tuple[str, ...] = ()


def generate_labels(
    comparison: GroupComparison, seed: int, mode: str = "max"
) -> list[PreferenceQuery]:
    """Expand a group verdict into preference queries.

    ``mode="max"`` yields max(m, n) pairs covering both groups;
    ``mode="cartesian"`` yields all m*n pairs (ablation only).
    Skip verdicts expand to nothing.
    """
    if comparison.verdict == "skip":
        return []
    if comparison.verdict == "tie":
        return [
            PreferenceQuery(comparison.group_1[0], comparison.group_2[0], "tie", comparison.id)
        ]
    outcome = "i_preferred" if comparison.verdict == "g1_preferred" else "j_preferred"
    g1 = sorted(comparison.group_1)
    g2 = sorted(comparison.group_2)
    queries = []
    if mode == "cartesian":
        for a in g1:
            for b in g2:
                queries.append(PreferenceQuery(a, b, outcome, comparison.id))
        return queries
    if mode != "max":
        raise ValueError(f"unknown label mode {mode!r}")
    if len(g1) >= len(g2):
        larger, smaller, larger_is_g1 = g1, g2, True
    else:
        larger, smaller, larger_is_g1 = g2, g1, False
    rng = np.random.default_rng(seed)
    shuffled = [larger[i] for i in rng.permutation(len(larger))]
    for t, member in enumerate(shuffled):
        partner = smaller[t % len(smaller)]
        pair = (member, partner) if larger_is_g1 else (partner, member)
        queries.append(PreferenceQuery(pair[0], pair[1], outcome, comparison.id))
    return queries


class PreferenceStore:
    """Append-only log of comparisons and the queries they expanded into."""

    def __init__(
        self,
        seed: int = 0,
        label_mode: str = "max",
        preference_budget: int | None = None,
    ):
        self.seed = seed
        self.label_mode = label_mode
        self.preference_budget = preference_budget
        self._comparisons: list[GroupComparison] = []
        self._queries: list[PreferenceQuery] = []
        self._ids: set[str] = set()

    def record(self, comparison: GroupComparison) -> list[PreferenceQuery]:
        if comparison.id in self._ids:
            raise ValueError(f"duplicate comparison id {comparison.id!r}")
        label_seed = (self.seed, len(self._comparisons))
        labels = generate_labels(
            comparison, np.random.SeedSequence(label_seed).generate_state(1)[0], self.label_mode
        )
        if self.preference_budget is not None and labels:
            remaining = self.preference_budget - len(self._queries)
            if remaining <= 0:
                labels = []
            elif len(labels) > remaining:
                rng = np.random.default_rng((self.seed, 0xB06E7, len(self._comparisons)))
                keep = sorted(rng.choice(len(labels), size=remaining, replace=False))
                labels = [labels[i] for i in keep]
        self._ids.add(comparison.id)
        self._comparisons.append(comparison)
        self._queries.extend(labels)
        return labels

    def history(self, round_index: int | None = None) -> list[GroupComparison]:
        if round_index is None:
            return list(self._comparisons)
        return [c for c in self._comparisons if c.round_index == round_index]

    def queries(self) -> list[PreferenceQuery]:
        return list(self._queries)

    def compared_group_pairs(self) -> set[frozenset[frozenset[str]]]:
        return {
            frozenset((frozenset(c.group_1), frozenset(c.group_2))) for c in self._comparisons
        }

    def compared_singleton_pairs(self) -> set[frozenset[str]]:
        return {
            frozenset((c.group_1[0], c.group_2[0]))
            for c in self._comparisons
            if len(c.group_1) == 1 and len(c.group_2) == 1
        }

    # -- persistence ---------------------------------------------------

    def log_lines(self) -> list[str]:
        return [
            json.dumps(
                {
                    "id": c.id,
                    "round": c.round_index,
                    "g1": list(c.group_1),
                    "g2": list(c.group_2),
                    "verdict": c.verdict,
                    "origin": c.origin,
                    "ts": c.ts,
                },
                sort_keys=True,
            )
            for c in self._comparisons
        ]

    def queries_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["tau_i", "tau_j", "outcome", "source_comparison"])
        for q in self._queries:
            writer.writerow([q.tau_i, q.tau_j, q.outcome, q.source_comparison])
        return buf.getvalue()

    def state(self) -> dict:
        return {
            "seed": self.seed,
            "label_mode": self.label_mode,
            "preference_budget": self.preference_budget,
            "comparisons": [json.loads(line) for line in self.log_lines()],
            "queries": [
                [q.tau_i, q.tau_j, q.outcome, q.source_comparison] for q in self._queries
            ],
        }

    @classmethod
    def from_state(cls, state: dict) -> "PreferenceStore":
        store = cls(
            seed=state["seed"],
            label_mode=state["label_mode"],
            preference_budget=state["preference_budget"],
        )
        for doc in state["comparisons"]:
            comp = GroupComparison(
                id=doc["id"],
                group_1=tuple(doc["g1"]),
                group_2=tuple(doc["g2"]),
                verdict=doc["verdict"],
                origin=doc["origin"],
                round_index=doc["round"],
                ts=doc.get("ts", 0.0),
            )
            store._ids.add(comp.id)
            store._comparisons.append(comp)
        store._queries = [PreferenceQuery(*row) for row in state["queries"]]
        return store


def suggest_pair(
    ensemble: Ensemble,
    behaviors: list[Behavior],
    exclude: set[frozenset[str]] | None = None,
) -> tuple[str, str]:
    """The unordered pair with the largest member disagreement.

    Ties break toward the lowest id pair; previously compared pairs are
    excluded. Raises LookupError when every pair is exhausted.
    """
    if len(behaviors) < 2:
        raise ValueError("need at least 2 behaviors")
    ordered = sorted(behaviors, key=lambda b: b.id)
    dis = disagreement_matrix(ensemble, ordered)
    exclude = exclude or set()
    best, best_score = None, -1.0
    n = len(ordered)
    for i in range(n):
        for j in range(i + 1, n):
            if frozenset((ordered[i].id, ordered[j].id)) in exclude:
                continue
            # float-noise-level differences count as ties (lowest ids win)
            if dis[i, j] > best_score + 1e-24 + 1e-12 * abs(best_score):
                best, best_score = (ordered[i].id, ordered[j].id), dis[i, j]
    if best is None:
        raise LookupError("all behavior pairs have been compared")
    return best


def group_score(ensemble: Ensemble, g1: list[Behavior], g2: list[Behavior]) -> float:
    """Variance-ratio score favoring coherent, mutually uncertain groups."""
    if not g1 or not g2:
        raise ValueError("groups must be nonempty")
    v_inter = float(
        np.mean([pair_disagreement(ensemble, a, b) for a in g1 for b in g2])
    )

    def intra(group: list[Behavior]) -> float:
        if len(group) < 2:
            return 0.0
        vals = [
            pair_disagreement(ensemble, group[i], group[j])
            for i in range(len(group))
            for j in range(i + 1, len(group))
        ]
        return float(np.mean(vals))

    v_intra = 0.5 * (intra(g1) + intra(g2))
    r = max(len(g1), len(g2)) / min(len(g1), len(g2))
    return v_inter / (r * v_intra + SCORE_EPS)


def _candidate_nodes(
    dend: Dendrogram, include_leaves: bool, min_count: int = 1
) -> list[int]:
    out = []
    for nid in sorted(dend.nodes):
        node = dend.nodes[nid]
        if node.leaf_count > MAX_GROUP_SIZE or node.leaf_count < min_count:
            continue
        if node.is_leaf and not include_leaves:
            continue
        out.append(nid)
    return out


def _disjoint(dend: Dendrogram, a: int, b: int) -> bool:
    s1, s2 = dend.nodes[a].leaf_span, dend.nodes[b].leaf_span
    return s1[1] <= s2[0] or s2[1] <= s1[0]


def rank_group_suggestions(
    ensemble: Ensemble,
    dend: Dendrogram,
    behaviors: list[Behavior],
    compared: set[frozenset[frozenset[str]]] | None = None,
    seed: int = 0,
    disagreement: np.ndarray | None = None,
) -> list[GroupSuggestion]:
    """All fresh candidate group pairs, best score first.

    Candidates are internal dendrogram nodes of at most MAX_GROUP_SIZE
    leaves; leaves join the pool only if no fresh internal pair exists.
    When more than SCAN_PAIR_CAP disjoint pairs remain, a seeded uniform
    sample of that size is scored instead.
    """
    compared = compared or set()
    index_of = {b.id: i for i, b in enumerate(behaviors)}
    if disagreement is None:
        disagreement = disagreement_matrix(ensemble, behaviors)

    def fresh_pairs(include_leaves: bool, min_count: int):
        cands = _candidate_nodes(dend, include_leaves, min_count)
        pairs = []
        for ai in range(len(cands)):
            for bi in range(ai + 1, len(cands)):
                a, b = cands[ai], cands[bi]
                if not _disjoint(dend, a, b):
                    continue
                key = frozenset(
                    (frozenset(dend.leaves_under(a)), frozenset(dend.leaves_under(b)))
                )
                if key in compared:
                    continue
                pairs.append((a, b))
        return cands, pairs

    # prefer proper clusters: nodes of >= 3 leaves first, because tiny
    # near-duplicate clusters have ~zero within-group disagreement and the
    # score ratio degenerates the same way singleton pairs do
    cands, pairs = [], []
    for include_leaves, min_count in ((False, 3), (False, 2), (True, 1)):
        cands, pairs = fresh_pairs(include_leaves, min_count)
        if pairs:
            break
    if not pairs:
        raise LookupError("no disjoint uncompared group pair available")
    if len(pairs) > SCAN_PAIR_CAP:
        rng = np.random.default_rng((seed, 0x5CA9))
        keep = rng.choice(len(pairs), size=SCAN_PAIR_CAP, replace=False)
        pairs = [pairs[i] for i in sorted(keep)]

    node_pos = {nid: k for k, nid in enumerate(cands)}
    leaf_lists = [
        np.array([index_of[bid] for bid in dend.leaves_under(nid)], dtype=np.int64)
        for nid in cands
    ]
    offsets = np.zeros(len(cands) + 1, dtype=np.int64)
    for k, ll in enumerate(leaf_lists):
        offsets[k + 1] = offsets[k] + ll.size
    flat = np.concatenate(leaf_lists) if leaf_lists else np.zeros(0, dtype=np.int64)
    counts = np.array([ll.size for ll in leaf_lists], dtype=np.float64)
    intra = np.zeros(len(cands))
    for k, ll in enumerate(leaf_lists):
        if ll.size >= 2:
            sub = disagreement[np.ix_(ll, ll)]
            iu = np.triu_indices(ll.size, k=1)
            intra[k] = sub[iu].mean()
    pair_arr = np.array(
        [[node_pos[a], node_pos[b]] for a, b in pairs], dtype=np.int64
    )
    scores = _kernels.group_score_scan(disagreement, flat, offsets, intra, counts, pair_arr)

    order = np.argsort(-scores, kind="stable")  # pairs pre-sorted by id, so ties go low
    ranked = []
    for t in order:
        a, b = pairs[int(t)]
        ranked.append(
            GroupSuggestion(
                node_1=a,
                node_2=b,
                score=float(scores[int(t)]),
                leaves_1=tuple(dend.leaves_under(a)),
                leaves_2=tuple(dend.leaves_under(b)),
            )
        )
    return ranked


def suggest_groups(
    ensemble: Ensemble,
    dend: Dendrogram,
    behaviors: list[Behavior],
    compared: set[frozenset[frozenset[str]]] | None = None,
    seed: int = 0,
) -> GroupSuggestion:
    """The single best fresh group pair (see rank_group_suggestions)."""
    return rank_group_suggestions(ensemble, dend, behaviors, compared, seed)[0]
