"""Core data model: centerline lane graphs and the merged key-point DAG.

A lane graph is a set of ordered 3D centerlines plus an adjacency matrix
(A[i][j] nonzero means lane i's endpoint feeds lane j's start). The DAG
form merges coincident endpoints into shared key points so each lane
becomes a single directed edge with a fitted curve control point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bezier import EdgeCurve, Point2, fit_control_point, sample_curve
from .config import CodecConfig, DEFAULT_CONFIG
from .errors import CycleDetected, InconsistentAdjacency, NonFiniteCoordinate


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise NonFiniteCoordinate(f"non-finite point ({self.x}, {self.y}, {self.z})")

    @property
    def xy(self) -> Point2:
        return (self.x, self.y)


@dataclass(frozen=True)
class Centerline:
    """Ordered start-to-end point list describing one drivable lane."""

    points: tuple[Point3, ...]

    def __init__(self, points):
        pts = tuple(p if isinstance(p, Point3) else Point3(*p) for p in points)
        if len(pts) < 2:
            raise ValueError("a centerline needs at least 2 points")
        object.__setattr__(self, "points", pts)

    @property
    def start(self) -> Point3:
        return self.points[0]

    @property
    def end(self) -> Point3:
        return self.points[-1]


class LaneGraph:
    """Centerlines + adjacency (+ optional per-lane confidence scores).

    The adjacency matrix may be binary or probabilistic; entries must lie
    in [0, 1] with a zero diagonal. Instances are immutable.
    """

    __slots__ = ("lanes", "adjacency", "scores")

    def __init__(self, lanes, adjacency, scores=None):
        lanes = tuple(l if isinstance(l, Centerline) else Centerline(l) for l in lanes)
        adj = np.asarray(adjacency, dtype=float)
        m = len(lanes)
        if adj.shape != (m, m):
            raise ValueError(f"adjacency must be {m}x{m}, got {adj.shape}")
        if m and (not np.all(np.isfinite(adj)) or adj.min() < 0.0 or adj.max() > 1.0):
            raise ValueError("adjacency entries must be finite and in [0, 1]")
        if m and np.any(np.diag(adj) != 0.0):
            raise ValueError("adjacency diagonal must be zero")
        if scores is not None:
            scores = tuple(float(s) for s in scores)
            if len(scores) != m:
                raise ValueError("need one score per lane")
            if any(not (0.0 <= s <= 1.0) for s in scores):
                raise ValueError("scores must lie in [0, 1]")
        adj.setflags(write=False)
        object.__setattr__(self, "lanes", lanes)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "scores", scores)

    def __setattr__(self, *a):  # immutability guard
        raise AttributeError("LaneGraph is immutable")

    def __len__(self) -> int:
        return len(self.lanes)

    def binarized(self, cfg: CodecConfig) -> np.ndarray:
        return (self.adjacency >= cfg.adjacency_threshold).astype(int)


@dataclass(frozen=True)
class DagEdge:
    src: int
    dst: int
    control: Point2
    score: float | None = None


@dataclass(frozen=True)
class KeyPointDag:
    """Merged key points plus directed lane edges with Bezier controls."""

    keypoints: tuple[Point3, ...]
    edges: tuple[DagEdge, ...]

    def __init__(self, keypoints, edges):
        kps = tuple(p if isinstance(p, Point3) else Point3(*p) for p in keypoints)
        egs = tuple(e if isinstance(e, DagEdge) else DagEdge(*e) for e in edges)
        object.__setattr__(self, "keypoints", kps)
        object.__setattr__(self, "edges", egs)


@dataclass(frozen=True)
class Violation:
    """One broken invariant: rule name plus the offending ids."""

    rule: str
    ids: tuple[int, ...]

    def __str__(self) -> str:
        return f"{self.rule}({', '.join(str(i) for i in self.ids)})"


def validate_dag(d: KeyPointDag, cfg: CodecConfig = DEFAULT_CONFIG) -> list[Violation]:
    """Check all KeyPointDag invariants; an empty list means well-formed."""
    out: list[Violation] = []
    k = len(d.keypoints)
    ok_edges = []
    for idx, e in enumerate(d.edges):
        if not (0 <= e.src < k and 0 <= e.dst < k):
            out.append(Violation("BadEdgeRef", (idx,)))
            continue
        if e.src == e.dst:
            out.append(Violation("SelfLoop", (e.src,)))
            continue
        ok_edges.append(e)

    cycle = _find_cycle_nodes(k, ok_edges)
    if cycle:
        out.append(Violation("Cycle", tuple(cycle)))

    if k > 1 and cfg.merge_tolerance > 0:
        pts = np.array([(p.x, p.y, p.z) for p in d.keypoints])
        dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
        ii, jj = np.nonzero(np.triu(dist < cfg.merge_tolerance, k=1))
        out.extend(Violation("TooClose", (int(i), int(j))) for i, j in zip(ii, jj))
    return out


def _find_cycle_nodes(k: int, edges) -> list[int]:
    """Kahn's algorithm; returns the node set left after peeling, if any."""
    indeg = [0] * k
    succ: list[list[int]] = [[] for _ in range(k)]
    for e in edges:
        indeg[e.dst] += 1
        succ[e.src].append(e.dst)
    queue = [i for i in range(k) if indeg[i] == 0]
    seen = 0
    while queue:
        u = queue.pop()
        seen += 1
        for v in succ[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    if seen == k:
        return []
    return [i for i in range(k) if indeg[i] > 0]


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def lanegraph_to_dag(g: LaneGraph, cfg: CodecConfig) -> KeyPointDag:
    """Merge lane endpoints into key points and emit one edge per lane.

    Merging unions (a) endpoint/start pairs implied by the binarized
    adjacency, after checking their geometric gap is within tolerance, and
    (b) any two endpoints strictly closer than the tolerance, which repairs
    near-coincident predictions and keeps the result's key points
    separable. Merged coordinates are arithmetic means, re-merged until all
    key points are at least the tolerance apart.
    """
    m = len(g.lanes)
    if m == 0:
        return KeyPointDag((), ())
    eps = cfg.merge_tolerance
    # endpoint node layout: 2i = start of lane i, 2i+1 = end of lane i
    nodes = np.array(
        [c for lane in g.lanes for c in ((lane.start.x, lane.start.y, lane.start.z),
                                         (lane.end.x, lane.end.y, lane.end.z))]
    )
    uf = _UnionFind(2 * m)

    binary = g.binarized(cfg)
    for i, j in zip(*np.nonzero(binary)):
        if i == j:
            continue
        gap = float(np.linalg.norm(nodes[2 * i + 1] - nodes[2 * j]))
        if gap > eps:
            raise InconsistentAdjacency(int(i), int(j), gap, eps)
        uf.union(2 * i + 1, 2 * j)

    if eps > 0:
        dist = np.linalg.norm(nodes[:, None, :] - nodes[None, :, :], axis=2)
        for a, b in zip(*np.nonzero(np.triu(dist < eps, k=1))):
            uf.union(int(a), int(b))

    # cluster -> mean coordinate, iterated until cluster means separate
    clusters: dict[int, list[int]] = {}
    for n in range(2 * m):
        clusters.setdefault(uf.find(n), []).append(n)
    groups = [sorted(members) for _, members in sorted(clusters.items())]
    while True:
        means = np.array([nodes[g].mean(axis=0) for g in groups])
        if eps == 0 or len(groups) < 2:
            break
        d = np.linalg.norm(means[:, None, :] - means[None, :, :], axis=2)
        close = np.argwhere(np.triu(d < eps, k=1))
        if not len(close):
            break
        merge = _UnionFind(len(groups))
        for a, b in close:
            merge.union(int(a), int(b))
        fused: dict[int, list[int]] = {}
        for gi, members in enumerate(groups):
            fused.setdefault(merge.find(gi), []).extend(members)
        groups = [sorted(members) for _, members in sorted(fused.items())]

    node_to_kp = {n: ki for ki, members in enumerate(groups) for n in members}
    keypoints = tuple(Point3(*xyz) for xyz in means)

    edges = []
    for i, lane in enumerate(g.lanes):
        src, dst = node_to_kp[2 * i], node_to_kp[2 * i + 1]
        if src == dst:
            raise CycleDetected(f"lane {i} starts and ends at the same key point")
        interior = [p.xy for p in lane.points[1:-1]]
        chain = [keypoints[src].xy, *interior, keypoints[dst].xy]
        if len(chain) >= 3:
            control = fit_control_point(chain).c
        else:
            control = ((chain[0][0] + chain[1][0]) / 2.0, (chain[0][1] + chain[1][1]) / 2.0)
        score = None if g.scores is None else g.scores[i]
        edges.append(DagEdge(src, dst, control, score))

    cycle = _find_cycle_nodes(len(keypoints), edges)
    if cycle:
        raise CycleDetected(f"merged graph has a directed cycle through key points {cycle}")
    return KeyPointDag(keypoints, tuple(edges))


def dag_to_lanegraph(d: KeyPointDag, cfg: CodecConfig) -> LaneGraph:
    """Sample each edge's curve back into a fixed-length centerline.

    Adjacency is exact: A[i][j] = 1 iff edge i's target key point is edge
    j's source, so connected lanes share endpoints with zero gap.
    """
    n = cfg.points_per_lane
    lanes = []
    for e in d.edges:
        p_src, p_dst = d.keypoints[e.src], d.keypoints[e.dst]
        pts2d = sample_curve(EdgeCurve(p_src.xy, e.control, p_dst.xy), n)
        zs = np.linspace(p_src.z, p_dst.z, n)
        lanes.append(Centerline([Point3(x, y, float(z)) for (x, y), z in zip(pts2d, zs)]))

    count = len(d.edges)
    adj = np.zeros((count, count))
    for i, ei in enumerate(d.edges):
        for j, ej in enumerate(d.edges):
            if i != j and ei.dst == ej.src:
                adj[i, j] = 1.0
    if any(e.score is not None for e in d.edges):
        scores = tuple(1.0 if e.score is None else e.score for e in d.edges)
    else:
        scores = None
    return LaneGraph(lanes, adj, scores)
