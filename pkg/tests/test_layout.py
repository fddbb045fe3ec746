"""Radial layout and edge bundling: partition-of-circle, hub containment,
straightening limits, and a golden scene frozen on disk."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from preflab import behavior_space as bs, layout
from conftest import random_behaviors

GOLDEN = Path(__file__).parent / "data" / "golden_scene.json"


@pytest.fixture(scope="module")
def dend():
    return bs.agglomerative_cluster(bs.distance_matrix(random_behaviors(16, seed=21)))


def fixture_scene(dend):
    ids = dend.leaf_order
    return layout.build_scene(
        dend,
        suggestions=[(ids[0], ids[9])],
        history=[
            (ids[1], ids[4], "first"),
            (ids[2], ids[12], "second"),
            (ids[5], ids[6], "skip"),
        ],
    )


class TestRadialLayout:
    def test_single_leaf_spans_full_circle(self):
        one = bs.agglomerative_cluster(bs.distance_matrix(random_behaviors(1)))
        arcs = layout.radial_layout(one)
        assert len(arcs) == 1
        assert arcs[0].start_angle == 0.0
        assert arcs[0].end_angle == pytest.approx(2 * math.pi)
        assert arcs[0].ring == 0

    def test_two_leaves_half_circle_each_plus_root(self):
        two = bs.agglomerative_cluster(bs.distance_matrix(random_behaviors(2)))
        arcs = layout.radial_layout(two)
        leaf_arcs = [a for a in arcs if a.ring == 0]
        assert len(leaf_arcs) == 2
        for arc in leaf_arcs:
            assert arc.end_angle - arc.start_angle == pytest.approx(math.pi)
        root_arcs = [a for a in arcs if a.ring == 1]
        assert len(root_arcs) == 1
        assert root_arcs[0].end_angle - root_arcs[0].start_angle == pytest.approx(2 * math.pi)

    def test_leaf_spans_partition_circle(self, dend):
        arcs = layout.radial_layout(dend)
        leaf_arcs = sorted((a for a in arcs if a.ring == 0), key=lambda a: a.start_angle)
        total = sum(a.end_angle - a.start_angle for a in leaf_arcs)
        assert abs(total - 2 * math.pi) <= 1e-9
        for prev, nxt in zip(leaf_arcs, leaf_arcs[1:]):
            assert nxt.start_angle == pytest.approx(prev.end_angle, abs=1e-12)

    def test_angular_span_proportional_to_leaf_count(self, dend):
        arcs = {a.node_id: a for a in layout.radial_layout(dend)}
        n = dend.n_leaves
        for nid, node in dend.nodes.items():
            arc = arcs[nid]
            assert arc.end_angle - arc.start_angle == pytest.approx(
                2 * math.pi * node.leaf_count / n
            )

    def test_parent_span_equals_union_of_children(self, dend):
        arcs = {a.node_id: a for a in layout.radial_layout(dend)}
        for nid, node in dend.nodes.items():
            if not node.children:
                continue
            child_arcs = [arcs[c] for c in node.children]
            assert arcs[nid].start_angle == pytest.approx(
                min(c.start_angle for c in child_arcs)
            )
            assert arcs[nid].end_angle == pytest.approx(max(c.end_angle for c in child_arcs))

    def test_rings_disjoint_within_ring(self, dend):
        arcs = layout.radial_layout(dend)
        by_ring = {}
        for a in arcs:
            by_ring.setdefault(a.ring, []).append(a)
        for ring_arcs in by_ring.values():
            ring_arcs.sort(key=lambda a: a.start_angle)
            for prev, nxt in zip(ring_arcs, ring_arcs[1:]):
                assert nxt.start_angle >= prev.end_angle - 1e-12

    def test_leaves_innermost(self, dend):
        arcs = layout.radial_layout(dend)
        leaf_inner = {a.inner_radius for a in arcs if a.ring == 0}
        assert leaf_inner == {layout.R_HUB}
        for a in arcs:
            if a.ring > 0:
                assert a.inner_radius > layout.R_HUB


class TestBundleEdge:
    def test_beta_zero_collinear_on_chord(self, dend):
        ids = dend.leaf_order
        pts = layout.bundle_edge(dend, ids[0], ids[7], beta=0.0)
        xy = [(r * math.sin(t), r * math.cos(t)) for r, t in pts]
        x0, y0 = xy[0]
        x1, y1 = xy[-1]
        for x, y in xy[1:-1]:
            cross = (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0)
            assert abs(cross) <= 1e-9

    def test_beta_one_is_tree_positions(self, dend):
        ids = dend.leaf_order
        a, b = ids[0], ids[7]
        raw = layout.bundle_edge(dend, a, b, beta=1.0)
        assert raw[0][0] == pytest.approx(layout.R_HUB)
        assert raw[-1][0] == pytest.approx(layout.R_HUB)

    def test_siblings_have_three_control_points(self, dend):
        # find two leaves sharing a parent
        for node in dend.nodes.values():
            if node.children and all(dend.nodes[c].is_leaf for c in node.children):
                a = dend.nodes[node.children[0]].leaf_behavior
                b = dend.nodes[node.children[1]].leaf_behavior
                assert len(layout.bundle_edge(dend, a, b)) == 3
                return
        pytest.fail("no sibling leaf pair in fixture")

    def test_identical_endpoints_rejected(self, dend):
        bid = dend.leaf_order[0]
        with pytest.raises(ValueError):
            layout.bundle_edge(dend, bid, bid)

    def test_unknown_leaf_rejected(self, dend):
        with pytest.raises(KeyError):
            layout.bundle_edge(dend, dend.leaf_order[0], "nope")

    def test_interior_points_stay_inside_hub(self, dend):
        ids = dend.leaf_order
        gen = np.random.default_rng(0)
        for _ in range(30):
            i, j = gen.choice(len(ids), size=2, replace=False)
            pts = layout.bundle_edge(dend, ids[int(i)], ids[int(j)])
            assert pts[0][0] == pytest.approx(layout.R_HUB, abs=1e-12)
            assert pts[-1][0] == pytest.approx(layout.R_HUB, abs=1e-12)
            for radius, _ in pts[1:-1]:
                assert radius <= layout.R_HUB + 1e-12


class TestBuildScene:
    def test_no_edges_without_items(self, dend):
        scene = layout.build_scene(dend)
        assert scene.edges == []
        assert len(scene.arcs) == len(dend.nodes)

    def test_history_gradient_orientation(self, dend):
        ids = dend.leaf_order
        scene = layout.build_scene(dend, history=[(ids[0], ids[3], "first")])
        (edge,) = scene.edges
        assert edge.kind == "history"
        assert edge.verdict_color == (layout.PREFERRED_COLOR, layout.UNPREFERRED_COLOR)
        scene2 = layout.build_scene(dend, history=[(ids[0], ids[3], "second")])
        assert scene2.edges[0].verdict_color == (
            layout.UNPREFERRED_COLOR,
            layout.PREFERRED_COLOR,
        )

    def test_suggestions_carry_no_color(self, dend):
        ids = dend.leaf_order
        scene = layout.build_scene(dend, suggestions=[(ids[0], ids[5])])
        assert scene.edges[0].verdict_color is None

    def test_fifty_history_one_suggestion(self, dend):
        ids = dend.leaf_order
        gen = np.random.default_rng(1)
        history = []
        for _ in range(50):
            i, j = gen.choice(len(ids), size=2, replace=False)
            history.append((ids[int(i)], ids[int(j)], "first"))
        scene = layout.build_scene(dend, suggestions=[(ids[0], ids[1])], history=history)
        assert len(scene.edges) == 51
        assert sum(1 for e in scene.edges if e.verdict_color is None) == 1

    def test_unknown_id_rejected(self, dend):
        with pytest.raises(KeyError):
            layout.build_scene(dend, suggestions=[("ghost", dend.leaf_order[0])])

    def test_scene_pure_function_of_inputs(self, dend):
        assert fixture_scene(dend).to_json() == fixture_scene(dend).to_json()


def test_golden_scene_matches_committed_file(dend):
    scene_json = fixture_scene(dend).to_json()
    if not GOLDEN.exists():
        GOLDEN.parent.mkdir(parents=True, exist_ok=True)
        GOLDEN.write_text(scene_json + "\n")
        pytest.skip("golden file created; rerun to compare")
    assert scene_json == GOLDEN.read_text().rstrip("\n")
    # parses as JSON and exposes the documented keys
    doc = json.loads(scene_json)
    assert set(doc) == {"arcs", "edges", "leaf_angle", "hub_radius"}
