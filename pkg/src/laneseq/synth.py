"""Seeded synthetic key-point DAG generator for tests and fixtures.

Growth is monotone in x (every child sits strictly forward of its
parents), which makes the result acyclic by construction. Key points are
rejection-sampled to stay inside the BEV range, more than the merge
tolerance apart, and in distinct quantizer cells so the full pipeline
accepts every sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import CodecConfig, DEFAULT_CONFIG
from .errors import ConfigError, SpecInfeasible
from .graph import DagEdge, KeyPointDag, Point3
from .quantize import quantize
from .vocab import Vocabulary

_MARGIN = 1.0  # meters kept clear of the BEV boundary
_TRIES = 60  # placement attempts per point before giving up locally


@dataclass(frozen=True)
class GenSpec:
    seed: int = 0
    roots: int = 2
    max_depth: int = 4
    fork_prob: float = 0.25
    merge_prob: float = 0.15
    curvature: float = 1.0  # control-point offset scale, meters
    max_edges: int | None = None  # sextet cap; None means the config budget

    def __post_init__(self):
        if self.roots < 1 or self.max_depth < 1:
            raise ConfigError("roots and max_depth must be >= 1")
        for name in ("fork_prob", "merge_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.curvature < 0:
            raise ConfigError("curvature must be nonnegative")
        if self.max_edges is not None and self.max_edges < 1:
            raise ConfigError("max_edges cap must be >= 1")


def generate(spec: GenSpec, cfg: CodecConfig = DEFAULT_CONFIG) -> KeyPointDag:
    """Grow one random DAG; identical spec and config give identical output."""
    rng = np.random.default_rng(spec.seed)
    x_lo, x_hi = cfg.x_range[0] + _MARGIN, cfg.x_range[1] - _MARGIN
    y_lo, y_hi = cfg.y_range[0] + _MARGIN, cfg.y_range[1] - _MARGIN
    if x_lo >= x_hi or y_lo >= y_hi:
        raise SpecInfeasible("BEV range too small for the placement margin")

    sextet_cap = min(spec.max_edges or cfg.max_edges, cfg.max_edges)
    kp_cap = min(cfg.max_prompt_points, Vocabulary.from_config(cfg).base - 1)

    points: list[tuple[float, float]] = []
    cells: set = set()
    edges: list[tuple[int, int]] = []

    def try_place(lo_x: float, hi_x: float) -> int | None:
        if len(points) >= kp_cap or lo_x >= hi_x:
            return None
        for _ in range(_TRIES):
            x = float(rng.uniform(lo_x, hi_x))
            y = float(rng.uniform(y_lo, y_hi))
            cell = quantize(x, y, cfg)
            if cell in cells:
                continue
            if points and np.min(
                np.linalg.norm(np.asarray(points) - (x, y), axis=1)
            ) <= cfg.merge_tolerance:
                continue
            points.append((x, y))
            cells.add(cell)
            return len(points) - 1
        return None

    # roots in the rear quarter so every path has room to grow forward
    roots: list[int] = []
    for _ in range(spec.roots):
        r = try_place(x_lo, x_lo + 0.25 * (x_hi - x_lo))
        if r is not None:
            roots.append(r)
    if not roots:
        raise SpecInfeasible("could not place any root key point")

    def budget_left() -> int:
        return sextet_cap - len(roots) - len(edges)

    frontier = [(r, 0) for r in roots]
    while frontier:
        node, depth = frontier.pop(0)
        if depth >= spec.max_depth or budget_left() <= 0:
            continue
        n_children = 2 if rng.random() < spec.fork_prob else 1
        for _ in range(n_children):
            if budget_left() <= 0:
                break
            px = points[node][0]
            child = try_place(min(px + 4.0, x_hi), min(px + 12.0, x_hi))
            if child is None:
                continue
            edges.append((node, child))
            # occasionally give the child a second, rearward parent
            if (rng.random() < spec.merge_prob and budget_left() > 0):
                cx = points[child][0]
                others = [
                    i for i, _ in frontier
                    if i != node and points[i][0] < cx
                    and (i, child) not in edges
                ]
                if others:
                    extra = others[int(rng.integers(0, len(others)))]
                    edges.append((extra, child))
            frontier.append((child, depth + 1))

    used = sorted({i for e in edges for i in e}) or roots[:1]
    remap = {old: new for new, old in enumerate(used)}
    keypoints = tuple(Point3(points[i][0], points[i][1], 0.0) for i in used)

    dag_edges = []
    for src, dst in edges:
        a, b = np.asarray(points[src]), np.asarray(points[dst])
        mid = (a + b) / 2.0
        direction = b - a
        norm = float(np.linalg.norm(direction))
        perp = np.array([-direction[1], direction[0]]) / norm
        offset = float(rng.uniform(-spec.curvature, spec.curvature))
        c = mid + perp * offset
        c[0] = float(np.clip(c[0], x_lo, x_hi))
        c[1] = float(np.clip(c[1], y_lo, y_hi))
        dag_edges.append(DagEdge(remap[src], remap[dst], (float(c[0]), float(c[1]))))
    return KeyPointDag(keypoints, tuple(dag_edges))
