"""Radial icicle layout (leaves innermost) with bundled leaf-to-leaf edges.

Angles are radians in [0, 2*pi), zero at 12 o'clock, increasing clockwise;
the client maps a polar point to pixels via x = cx + r*sin(theta)*scale,
y = cy - r*cos(theta)*scale. Radii are normalized to [0, 1]. The disk of
radius ``R_HUB`` is reserved for bundled edges: the leaf ring starts at
``R_HUB`` and every deeper ring stacks outward with uniform thickness, so
no edge ever crosses a selectable arc.

Edges follow Holten-style bundling: the control polygon is the dendrogram
path between the two leaves (each node placed at its subtree's midpoint
angle, radius shrinking toward the hub with ring height), pulled toward
the straight chord by (1 - beta). The client renders a uniform cubic
B-spline through the control points.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .behavior_space import Dendrogram

R_HUB = 0.55
DEFAULT_BETA = 0.85

SUGGESTION_COLOR = "#9e9e9e"
PREFERRED_COLOR = "#2e7d32"
UNPREFERRED_COLOR = "#c62828"
NEUTRAL_COLOR = "#7a8ba6"

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Arc:
    node_id: int
    ring: int
    start_angle: float
    end_angle: float
    inner_radius: float
    outer_radius: float
    selectable: bool
    leaf_behavior: str | None = None


@dataclass(frozen=True)
class BundledEdge:
    endpoints: tuple[str, str]  # leaf behavior ids
    kind: str  # "suggestion" | "history"
    control_points: tuple[tuple[float, float], ...]  # (radius, angle)
    verdict_color: tuple[str, str] | None = None  # colors at (first, second) endpoint


@dataclass
class LayoutScene:
    arcs: list[Arc]
    edges: list[BundledEdge]
    leaf_angle: dict[str, float]

    def to_payload(self) -> dict:
        return {
            "arcs": [
                {
                    "node_id": a.node_id,
                    "ring": a.ring,
                    "start_angle": a.start_angle,
                    "end_angle": a.end_angle,
                    "inner_radius": a.inner_radius,
                    "outer_radius": a.outer_radius,
                    "selectable": a.selectable,
                    **({"leaf_behavior": a.leaf_behavior} if a.leaf_behavior else {}),
                }
                for a in self.arcs
            ],
            "edges": [
                {
                    "endpoints": list(e.endpoints),
                    "kind": e.kind,
                    "control_points": [list(p) for p in e.control_points],
                    **(
                        {"verdict_color": list(e.verdict_color)}
                        if e.verdict_color is not None
                        else {}
                    ),
                }
                for e in self.edges
            ],
            "leaf_angle": self.leaf_angle,
            "hub_radius": R_HUB,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), sort_keys=True)


def _rings(dend: Dendrogram) -> dict[int, int]:
    """Ring index per node: leaves 0, parents 1 + max(children)."""
    rings: dict[int, int] = {}
    for nid in sorted(dend.nodes):  # children always have smaller ids
        node = dend.nodes[nid]
        rings[nid] = 0 if node.is_leaf else 1 + max(rings[c] for c in node.children)
    return rings


def _node_angle(dend: Dendrogram, nid: int) -> float:
    a, b = dend.nodes[nid].leaf_span
    n = dend.n_leaves
    return TWO_PI * (a + b) / (2.0 * n)


def radial_layout(dend: Dendrogram) -> list[Arc]:
    n = dend.n_leaves
    rings = _rings(dend)
    height = max(rings.values())
    thickness = (1.0 - R_HUB) / (height + 1)
    arcs = []
    for nid in sorted(dend.nodes):
        node = dend.nodes[nid]
        span_a, span_b = node.leaf_span
        ring = rings[nid]
        arcs.append(
            Arc(
                node_id=nid,
                ring=ring,
                start_angle=TWO_PI * span_a / n,
                end_angle=TWO_PI * span_b / n,
                inner_radius=R_HUB + ring * thickness,
                outer_radius=R_HUB + (ring + 1) * thickness,
                selectable=True,
                leaf_behavior=node.leaf_behavior,
            )
        )
    arcs.sort(key=lambda a: (a.ring, a.start_angle))
    return arcs


def _parent_map(dend: Dendrogram) -> dict[int, int]:
    parents = {}
    for nid, node in dend.nodes.items():
        for c in node.children:
            parents[c] = nid
    return parents


def _leaf_node_ids(dend: Dendrogram) -> dict[str, int]:
    return {
        node.leaf_behavior: nid
        for nid, node in dend.nodes.items()
        if node.leaf_behavior is not None
    }


def _to_cartesian(radius: float, angle: float) -> tuple[float, float]:
    return radius * math.sin(angle), radius * math.cos(angle)


def _to_polar(x: float, y: float) -> tuple[float, float]:
    r = math.hypot(x, y)
    if r < 1e-12:
        return 0.0, 0.0
    return r, math.atan2(x, y) % TWO_PI


def bundle_edge(dend: Dendrogram, a: str, b: str, beta: float = DEFAULT_BETA):
    """Control points (radius, angle) for the bundled edge between two leaves."""
    if a == b:
        raise ValueError("edge endpoints must differ")
    leaf_ids = _leaf_node_ids(dend)
    if a not in leaf_ids or b not in leaf_ids:
        missing = a if a not in leaf_ids else b
        raise KeyError(f"unknown leaf behavior id: {missing!r}")
    parents = _parent_map(dend)
    rings = _rings(dend)
    height = max(1, max(rings.values()))

    na, nb = leaf_ids[a], leaf_ids[b]
    up_a = [na]
    while up_a[-1] in parents:
        up_a.append(parents[up_a[-1]])
    ancestors_a = set(up_a)
    up_b = [nb]
    while up_b[-1] not in ancestors_a:
        up_b.append(parents[up_b[-1]])
    lca = up_b[-1]
    path = up_a[: up_a.index(lca) + 1] + list(reversed(up_b[:-1]))

    def node_pos(nid: int) -> tuple[float, float]:
        ring = rings[nid]
        radius = R_HUB * (1.0 - ring / height)
        return _to_cartesian(radius, _node_angle(dend, nid))

    pts = [node_pos(nid) for nid in path]
    p0, pn = pts[0], pts[-1]
    last = len(pts) - 1
    straightened = []
    for i, (x, y) in enumerate(pts):
        s = i / last
        cx = p0[0] + s * (pn[0] - p0[0])
        cy = p0[1] + s * (pn[1] - p0[1])
        straightened.append((beta * x + (1 - beta) * cx, beta * y + (1 - beta) * cy))
    return tuple(_to_polar(x, y) for x, y in straightened)


_EDGE_COLORS = {
    "first": (PREFERRED_COLOR, UNPREFERRED_COLOR),
    "second": (UNPREFERRED_COLOR, PREFERRED_COLOR),
    "tie": (NEUTRAL_COLOR, NEUTRAL_COLOR),
    "skip": (NEUTRAL_COLOR, NEUTRAL_COLOR),
}


def build_scene(
    dend: Dendrogram,
    suggestions: list[tuple[str, str]] | None = None,
    history: list[tuple[str, str, str]] | None = None,
    beta: float = DEFAULT_BETA,
) -> LayoutScene:
    """Arcs plus one bundled edge per suggestion / history item.

    History verdicts: "first" (gradient green at the first endpoint, red at
    the second), "second" (reversed), "tie"/"skip" (neutral both ends).
    """
    arcs = radial_layout(dend)
    edges = []
    for a, b in suggestions or []:
        edges.append(
            BundledEdge(
                endpoints=(a, b),
                kind="suggestion",
                control_points=bundle_edge(dend, a, b, beta),
            )
        )
    for a, b, verdict in history or []:
        if verdict not in _EDGE_COLORS:
            raise ValueError(f"unknown verdict {verdict!r}")
        edges.append(
            BundledEdge(
                endpoints=(a, b),
                kind="history",
                control_points=bundle_edge(dend, a, b, beta),
                verdict_color=_EDGE_COLORS[verdict],
            )
        )
    n = dend.n_leaves
    leaf_angle = {}
    for pos, bid in enumerate(dend.leaf_order):
        leaf_angle[bid] = TWO_PI * (pos + 0.5) / n
    return LayoutScene(arcs=arcs, edges=edges, leaf_angle=leaf_angle)
