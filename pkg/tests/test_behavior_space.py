"""Clustering behavior: hand-traced merges, scipy cross-checks, cut and
variance oracles, and the hierarchical-vs-PCA study on structured data."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.cluster.hierarchy import cophenet, linkage
from scipy.spatial.distance import squareform

from preflab import behavior_space as bs
from conftest import make_behavior, random_behaviors


def matrix_from(values, ids=None):
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    ids = ids or tuple(f"b{i:03d}" for i in range(n))
    return bs.DistanceMatrix(n=n, values=values, behavior_ids=tuple(ids))


class TestDtwDistance:
    def test_identity_and_symmetry(self):
        behaviors = random_behaviors(6, seed=1)
        for b in behaviors:
            assert bs.dtw_distance(b, b) == 0.0
        for i in range(5):
            assert bs.dtw_distance(behaviors[i], behaviors[i + 1]) == pytest.approx(
                bs.dtw_distance(behaviors[i + 1], behaviors[i]), rel=1e-12
            )

    def test_dimension_mismatch_raises(self):
        a = make_behavior("a", np.zeros((4, 2)))
        b = make_behavior("b", np.zeros((4, 3)))
        with pytest.raises(ValueError):
            bs.dtw_distance(a, b)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=25, deadline=None)
    def test_symmetry_property(self, seed):
        gen = np.random.default_rng(seed)
        a = gen.standard_normal((int(gen.integers(1, 8)), 3))
        b = gen.standard_normal((int(gen.integers(1, 8)), 3))
        assert bs.dtw_distance(a, b) == pytest.approx(bs.dtw_distance(b, a), rel=1e-12)

    def test_nonnegative(self):
        gen = np.random.default_rng(0)
        for _ in range(20):
            a = gen.standard_normal((5, 2))
            b = gen.standard_normal((7, 2))
            assert bs.dtw_distance(a, b) >= 0


class TestDistanceMatrix:
    def test_single_behavior(self):
        mat = bs.distance_matrix(random_behaviors(1))
        assert mat.n == 1 and mat.values.shape == (1, 1) and mat.values[0, 0] == 0.0

    def test_entries_match_pairwise_calls_on_normalized_states(self):
        behaviors = random_behaviors(5, seed=3)
        mat = bs.distance_matrix(behaviors)
        stack = bs.znormalize_states(behaviors)
        for i in range(5):
            for j in range(5):
                assert mat.values[i, j] == pytest.approx(
                    bs.dtw_distance(stack[i], stack[j]), abs=1e-10
                )

    def test_constant_dimension_does_not_blow_up(self):
        behaviors = [
            make_behavior(f"c{i}", np.column_stack([np.arange(4.0) * i, np.full(4, 3.0)]))
            for i in range(4)
        ]
        mat = bs.distance_matrix(behaviors)
        assert np.all(np.isfinite(mat.values))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            bs.distance_matrix([])


class TestAgglomerativeCluster:
    def test_two_points(self):
        dend = bs.agglomerative_cluster(matrix_from([[0, 2.5], [2.5, 0]]))
        root = dend.root
        assert root.leaf_count == 2
        assert root.merge_height == 2.5
        assert sorted(dend.nodes[c].leaf_behavior for c in root.children) == ["b000", "b001"]

    def test_hand_traced_four_point_example(self):
        # AB=1, CD=1, all cross distances 10: first merges are {A,B} and {C,D}
        values = np.full((4, 4), 10.0)
        np.fill_diagonal(values, 0.0)
        values[0, 1] = values[1, 0] = 1.0
        values[2, 3] = values[3, 2] = 1.0
        dend = bs.agglomerative_cluster(matrix_from(values, ids=("A", "B", "C", "D")))
        parts = bs.cut_to_k(dend, 2)
        assert sorted(sorted(p) for p in parts) == [["A", "B"], ["C", "D"]]
        # the final merge height is the average cross distance
        assert dend.root.merge_height == pytest.approx(10.0)

    def test_matches_scipy_average_linkage_cophenet(self):
        gen = np.random.default_rng(42)
        for _ in range(5):
            pts = gen.standard_normal((12, 3))
            diff = pts[:, None, :] - pts[None, :, :]
            dm = np.sqrt((diff**2).sum(axis=2))
            dend = bs.agglomerative_cluster(matrix_from(dm))
            ours = _cophenetic_matrix(dend)
            scipy_z = linkage(squareform(dm, checks=False), method="average")
            theirs = squareform(cophenet(scipy_z), checks=False)
            assert np.allclose(ours, theirs, atol=1e-9)

    def test_root_leaf_count_and_monotone_heights(self):
        behaviors = random_behaviors(20, seed=9)
        dend = bs.agglomerative_cluster(bs.distance_matrix(behaviors))
        assert dend.root.leaf_count == 20
        for node in dend.nodes.values():
            for c in node.children:
                assert node.merge_height >= dend.nodes[c].merge_height - 1e-12

    def test_parent_span_concatenates_children(self):
        behaviors = random_behaviors(15, seed=2)
        dend = bs.agglomerative_cluster(bs.distance_matrix(behaviors))
        for node in dend.nodes.values():
            if node.children:
                spans = sorted(dend.nodes[c].leaf_span for c in node.children)
                assert spans[0][1] == spans[1][0]
                assert node.leaf_span == (spans[0][0], spans[1][1])

    def test_leaf_order_stable_across_runs(self):
        behaviors = random_behaviors(18, seed=4)
        mat = bs.distance_matrix(behaviors)
        d1 = bs.agglomerative_cluster(mat)
        d2 = bs.agglomerative_cluster(mat)
        assert d1.leaf_order == d2.leaf_order
        assert d1.to_json() == d2.to_json()

    def test_json_roundtrip(self):
        dend = bs.agglomerative_cluster(bs.distance_matrix(random_behaviors(8)))
        back = bs.Dendrogram.from_json(dend.to_json())
        assert back.to_json() == dend.to_json()
        assert back.leaf_order == dend.leaf_order


def _cophenetic_matrix(dend):
    n = dend.n_leaves
    leaf_for = {}
    for nid, node in dend.nodes.items():
        if node.is_leaf:
            leaf_for[nid] = int(node.leaf_behavior.replace("b", ""))
    out = np.zeros((n, n))
    for nid in sorted(dend.nodes):
        node = dend.nodes[nid]
        if not node.children:
            continue
        left, right = node.children
        for a in dend.leaves_under(left):
            for b in dend.leaves_under(right):
                i, j = int(a.replace("b", "")), int(b.replace("b", ""))
                out[i, j] = out[j, i] = node.merge_height
    return out


class TestCutToK:
    @pytest.fixture
    def dend(self):
        return bs.agglomerative_cluster(bs.distance_matrix(random_behaviors(12, seed=6)))

    def test_k1_is_everything(self, dend):
        parts = bs.cut_to_k(dend, 1)
        assert len(parts) == 1 and len(parts[0]) == 12

    def test_kn_is_singletons(self, dend):
        parts = bs.cut_to_k(dend, 12)
        assert len(parts) == 12 and all(len(p) == 1 for p in parts)

    @pytest.mark.parametrize("k", [2, 3, 5, 7])
    def test_partition_properties(self, dend, k):
        parts = bs.cut_to_k(dend, k)
        assert len(parts) == k
        union = set().union(*parts)
        assert len(union) == 12
        assert sum(len(p) for p in parts) == 12  # disjoint

    def test_out_of_range_k(self, dend):
        with pytest.raises(ValueError):
            bs.cut_to_k(dend, 0)
        with pytest.raises(ValueError):
            bs.cut_to_k(dend, 13)


class TestIntraClusterVariance:
    def test_singletons_are_zero(self):
        returns = {"a": 1.0, "b": 5.0}
        assert bs.intra_cluster_variance([{"a"}, {"b"}], returns) == 0.0

    def test_two_member_cluster_arithmetic(self):
        assert bs.intra_cluster_variance([{"a", "b"}], {"a": 1.0, "b": 3.0}) == 1.0

    def test_matches_brute_force(self):
        gen = np.random.default_rng(8)
        ids = [f"x{i}" for i in range(20)]
        returns = {i: float(gen.normal()) for i in ids}
        partition = [set(ids[:7]), set(ids[7:8]), set(ids[8:20])]
        expected = np.mean(
            [
                np.var([returns[i] for i in cluster]) if len(cluster) > 1 else 0.0
                for cluster in partition
            ]
        )
        assert bs.intra_cluster_variance(partition, returns) == pytest.approx(expected)

    def test_empty_partition_rejected(self):
        with pytest.raises(ValueError):
            bs.intra_cluster_variance([], {})


def structured_round(seed, n=30, groups=3):
    """Amplitude groups with random phase jitter: alignment-based distances
    cluster by amplitude (which carries the return), while flattened
    vectors are dominated by phase."""
    gen = np.random.default_rng(seed)
    behaviors, returns = [], {}
    t = np.linspace(0, 2, 20)
    for i in range(n):
        g = i % groups
        amp = g + 1.0
        phase = gen.uniform(0, 1.0)
        sig = amp * np.sin(2 * np.pi * (t + phase)) + gen.normal(0, 0.08, size=20)
        b = make_behavior(f"s{seed}b{i:03d}", np.column_stack([sig, np.gradient(sig)]))
        behaviors.append(b)
        returns[b.id] = float(g * 10 + gen.normal(0, 0.5))
    return behaviors, returns


class TestClusteringQualityStudy:
    def test_identical_variance_sequences_give_t_zero(self):
        # artificial: same behaviors both arms -> diff sequence identically zero
        rounds = [structured_round(s) for s in range(3)]
        report = bs.StudyReport([1.0, 2.0], [1.0, 2.0], 0.0, 1.0, degenerate=True)
        assert report.t == 0.0
        hc_vars = [
            bs.intra_cluster_variance(
                bs.cut_to_k(bs.agglomerative_cluster(bs.distance_matrix(b)), 3), r
            )
            for b, r in rounds
        ]
        diffs = np.array(hc_vars) - np.array(hc_vars)
        assert np.all(diffs == 0)

    def test_structured_rounds_favor_hierarchical(self):
        rounds = [structured_round(s) for s in range(4)]
        report = bs.clustering_quality_study(rounds, k=3, seed=0)
        assert report.hc_wins >= 3
        assert not report.degenerate

    def test_needs_two_rounds(self):
        with pytest.raises(ValueError):
            bs.clustering_quality_study([structured_round(0)], k=2)


def test_resample_to_fixed_interpolates():
    b = make_behavior("r", np.arange(10.0))
    out = bs.resample_to_fixed(b, steps=25)
    assert out.shape == (25,)
    assert out[0] == 0.0 and out[-1] == 9.0
    assert np.all(np.diff(out) > 0)
