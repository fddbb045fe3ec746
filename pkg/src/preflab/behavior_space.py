"""Organizing a round's behaviors: DTW distances and hierarchical clustering.

Distances are classic dynamic time warping with Euclidean local cost over
the state sequences; before computing a round's distance matrix every
state dimension is z-normalized across the round (constant dimensions are
left at zero). Clustering is bottom-up average linkage with merge ties
broken by the lowest (row-major) pair of cluster slots, which makes leaf
order reproducible. The module also carries the clustering-quality
comparison against a PCA + k-means baseline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.cluster import KMeans
from sklearn.decomposition import PCA

from . import _kernels
from .envs import Behavior
from .stats import paired_t


@dataclass(frozen=True)
class DistanceMatrix:
    n: int
    values: np.ndarray  # (n, n) symmetric, zero diagonal
    behavior_ids: tuple[str, ...]


@dataclass
class DendrogramNode:
    id: int
    children: tuple[int, ...]  # empty for leaves
    merge_height: float
    leaf_count: int
    leaf_span: tuple[int, int]  # [start, stop) in the ordered leaf sequence
    leaf_behavior: str | None = None  # leaves only

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class Dendrogram:
    nodes: dict[int, DendrogramNode]
    root_id: int
    leaf_order: list[str] = field(default_factory=list)  # behavior ids, left to right

    @property
    def root(self) -> DendrogramNode:
        return self.nodes[self.root_id]

    @property
    def n_leaves(self) -> int:
        return self.root.leaf_count

    def leaves_under(self, node_id: int) -> list[str]:
        a, b = self.nodes[node_id].leaf_span
        return self.leaf_order[a:b]

    def leaf_positions_under(self, node_id: int) -> np.ndarray:
        a, b = self.nodes[node_id].leaf_span
        return np.arange(a, b)

    def to_json(self) -> str:
        doc = {
            "root": self.root_id,
            "leaf_order": self.leaf_order,
            "nodes": {
                str(nid): {
                    "children": list(node.children),
                    "merge_height": node.merge_height,
                    "leaf_count": node.leaf_count,
                    "leaf_span": list(node.leaf_span),
                    **(
                        {"leaf_behavior": node.leaf_behavior}
                        if node.leaf_behavior is not None
                        else {}
                    ),
                }
                for nid, node in self.nodes.items()
            },
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Dendrogram":
        doc = json.loads(text)
        nodes = {}
        for nid_s, nd in doc["nodes"].items():
            nid = int(nid_s)
            nodes[nid] = DendrogramNode(
                id=nid,
                children=tuple(nd["children"]),
                merge_height=float(nd["merge_height"]),
                leaf_count=int(nd["leaf_count"]),
                leaf_span=(int(nd["leaf_span"][0]), int(nd["leaf_span"][1])),
                leaf_behavior=nd.get("leaf_behavior"),
            )
        return cls(nodes=nodes, root_id=int(doc["root"]), leaf_order=list(doc["leaf_order"]))


def _as_series(x) -> np.ndarray:
    if isinstance(x, Behavior):
        arr = x.states
    else:
        arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError("series must be 1-D or 2-D (time, dims)")
    return np.ascontiguousarray(arr, dtype=np.float64)


def dtw_distance(a, b) -> float:
    """DTW alignment cost between two series (Behavior or array-like)."""
    sa, sb = _as_series(a), _as_series(b)
    if sa.shape[1] != sb.shape[1]:
        raise ValueError("series dimensionality differs")
    return _kernels.dtw_cost(sa, sb)


def znormalize_states(behaviors: list[Behavior]) -> np.ndarray:
    """Stack a round's states into (n, L, d), z-normalized per dimension.

    Constant dimensions map to zero rather than dividing by ~0.
    """
    stack = np.stack([b.states for b in behaviors]).astype(np.float64)
    flat = stack.reshape(-1, stack.shape[2])
    mu = flat.mean(axis=0)
    sd = flat.std(axis=0)
    sd = np.where(sd < 1e-12, 1.0, sd)
    return (stack - mu) / sd


def distance_matrix(behaviors: list[Behavior]) -> DistanceMatrix:
    if not behaviors:
        raise ValueError("no behaviors")
    dims = {b.states.shape[1] for b in behaviors}
    if len(dims) != 1:
        raise ValueError("behaviors have mixed state dimensionality")
    lengths = {len(b) for b in behaviors}
    ids = tuple(b.id for b in behaviors)
    if len(lengths) == 1:
        stack = znormalize_states(behaviors)
        values = _kernels.dtw_pairwise(stack)
    else:
        # mixed lengths: normalize over the pooled steps, then pair by pair
        pooled = np.concatenate([b.states for b in behaviors], axis=0)
        mu, sd = pooled.mean(axis=0), pooled.std(axis=0)
        sd = np.where(sd < 1e-12, 1.0, sd)
        normed = [np.ascontiguousarray((b.states - mu) / sd) for b in behaviors]
        n = len(behaviors)
        values = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                values[i, j] = values[j, i] = _kernels.dtw_cost(normed[i], normed[j])
    return DistanceMatrix(n=len(behaviors), values=values, behavior_ids=ids)


def agglomerative_cluster(matrix: DistanceMatrix) -> Dendrogram:
    """Average-linkage agglomeration into a binary merge tree.

    Merge heights are the average-linkage distances (monotone for this
    linkage). The ordered leaf sequence concatenates the lower-slot
    cluster's leaves before the higher-slot cluster's at every merge.
    """
    n = matrix.n
    total = 2 * n - 1
    nodes: dict[int, DendrogramNode] = {}
    if n == 1:
        nodes[0] = DendrogramNode(0, (), 0.0, 1, (0, 1), matrix.behavior_ids[0])
        return Dendrogram(nodes, 0, [matrix.behavior_ids[0]])

    big = np.full((total, total), np.inf)
    big[:n, :n] = matrix.values
    np.fill_diagonal(big, np.inf)
    active = np.zeros(total, dtype=bool)
    active[:n] = True
    sizes = np.zeros(total, dtype=np.int64)
    sizes[:n] = 1
    order: dict[int, list[int]] = {i: [i] for i in range(n)}

    for m in range(n - 1):
        act = np.flatnonzero(active)
        sub = big[np.ix_(act, act)]
        flat = int(np.argmin(sub))  # row-major => lowest slot pair wins ties
        r, c = divmod(flat, act.size)
        i, j = int(act[r]), int(act[c])
        if i > j:
            i, j = j, i
        height = float(big[i, j])
        new = n + m
        others = act[(act != i) & (act != j)]
        if others.size:
            big[new, others] = (sizes[i] * big[i, others] + sizes[j] * big[j, others]) / (
                sizes[i] + sizes[j]
            )
            big[others, new] = big[new, others]
        active[i] = active[j] = False
        active[new] = True
        sizes[new] = sizes[i] + sizes[j]
        order[new] = order.pop(i) + order.pop(j)
        nodes[new] = DendrogramNode(new, (i, j), height, int(sizes[new]), (0, 0))

    root_id = total - 1
    leaf_sequence = order[root_id]
    position = {leaf: pos for pos, leaf in enumerate(leaf_sequence)}
    for leaf in range(n):
        nodes[leaf] = DendrogramNode(
            leaf, (), 0.0, 1, (position[leaf], position[leaf] + 1), matrix.behavior_ids[leaf]
        )
    # spans bottom-up; children are always created before their parent
    for nid in range(n, total):
        c1, c2 = nodes[nid].children
        s1, s2 = nodes[c1].leaf_span, nodes[c2].leaf_span
        nodes[nid].leaf_span = (min(s1[0], s2[0]), max(s1[1], s2[1]))
    leaf_order = [matrix.behavior_ids[leaf] for leaf in leaf_sequence]
    return Dendrogram(nodes=nodes, root_id=root_id, leaf_order=leaf_order)


def cut_to_k(dend: Dendrogram, k: int) -> list[set[str]]:
    """Partition into k clusters by cutting the k-1 highest merges."""
    n = dend.n_leaves
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range 1..{n}")
    frontier = [dend.root_id]
    for _ in range(k - 1):
        # highest merge in the current forest; id breaks exact ties
        best = max(
            (nid for nid in frontier if dend.nodes[nid].children),
            key=lambda nid: (dend.nodes[nid].merge_height, nid),
        )
        frontier.remove(best)
        frontier.extend(dend.nodes[best].children)
    return [set(dend.leaves_under(nid)) for nid in frontier]


def intra_cluster_variance(partition: list[set[str]], true_returns: dict[str, float]) -> float:
    """Mean over clusters of the population variance of member true returns.

    Singleton clusters contribute zero but still count toward the mean.
    """
    if not partition:
        raise ValueError("empty partition")
    per_cluster = []
    for cluster in partition:
        vals = np.array([true_returns[bid] for bid in cluster], dtype=np.float64)
        per_cluster.append(float(vals.var()) if vals.size >= 2 else 0.0)
    return float(np.mean(per_cluster))


def resample_to_fixed(behavior: Behavior, steps: int = 25) -> np.ndarray:
    """Linear-interpolate a behavior's states to a fixed step count, flattened."""
    states = behavior.states
    L, d = states.shape
    if L == steps:
        return states.reshape(-1).copy()
    old = np.linspace(0.0, 1.0, L)
    new = np.linspace(0.0, 1.0, steps)
    cols = [np.interp(new, old, states[:, j]) for j in range(d)]
    return np.stack(cols, axis=1).reshape(-1)


def pca_kmeans_partition(behaviors: list[Behavior], k: int, seed: int = 0) -> list[set[str]]:
    """The baseline: PCA to 2-D on fixed-length flattened states, then k-means."""
    stack = znormalize_states(behaviors)
    fixed = np.stack(
        [
            resample_to_fixed(
                Behavior(b.id, stack[i], b.actions, b.true_return, b.round_index, b.source)
            )
            for i, b in enumerate(behaviors)
        ]
    )
    n_comp = min(2, fixed.shape[0], fixed.shape[1])
    proj = PCA(n_components=n_comp, random_state=seed).fit_transform(fixed)
    labels = KMeans(n_clusters=k, n_init=10, random_state=seed).fit_predict(proj)
    clusters: dict[int, set[str]] = {}
    for b, lab in zip(behaviors, labels):
        clusters.setdefault(int(lab), set()).add(b.id)
    return list(clusters.values())


@dataclass
class StudyReport:
    hc_variances: list[float]
    pca_variances: list[float]
    t: float
    p: float
    degenerate: bool

    @property
    def hc_wins(self) -> int:
        return sum(h < p for h, p in zip(self.hc_variances, self.pca_variances))


def clustering_quality_study(
    rounds: list[tuple[list[Behavior], dict[str, float]]], k: int, seed: int = 0
) -> StudyReport:
    """Per round, intra-cluster true-return variance for the hierarchical cut
    vs the PCA + k-means baseline, with a paired t-test across rounds.

    Positive t means the hierarchical cut shows lower variance.
    """
    if len(rounds) < 2:
        raise ValueError("need at least 2 rounds")
    hc_vars, pca_vars = [], []
    for behaviors, returns in rounds:
        dend = agglomerative_cluster(distance_matrix(behaviors))
        hc_vars.append(intra_cluster_variance(cut_to_k(dend, k), returns))
        pca_vars.append(
            intra_cluster_variance(pca_kmeans_partition(behaviors, k, seed), returns)
        )
    diffs = np.array(pca_vars) - np.array(hc_vars)
    if np.allclose(diffs.std(ddof=1), 0.0) and np.allclose(diffs.mean(), 0.0):
        return StudyReport(hc_vars, pca_vars, 0.0, 1.0, degenerate=True)
    t, p = paired_t(diffs)
    return StudyReport(hc_vars, pca_vars, t, p, degenerate=bool(np.isnan(t)))
