"""Key-point prompt construction: extract, deduplicate, shuffle.

A prompt is the unordered set of quantized lane endpoints handed to the
sequence decoder. Every selected lane contributes its end point; its
start point is contributed only when no selected predecessor already
covers it through the adjacency matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import CodecConfig
from .graph import LaneGraph
from .quantize import QuantPoint, quantize

REAL = "real"
NOISE = "noise"


@dataclass(frozen=True)
class PromptSet:
    points: tuple[QuantPoint, ...]
    provenance: tuple[str, ...] = ()  # "real" | "noise", parallel to points
    order_seed: int | None = None  # seed used for the last shuffle, if known

    def __post_init__(self):
        prov = self.provenance or tuple(REAL for _ in self.points)
        object.__setattr__(self, "provenance", prov)
        if len(prov) != len(self.points):
            raise ValueError("provenance must parallel points")
        if any(p not in (REAL, NOISE) for p in prov):
            raise ValueError("provenance tags must be 'real' or 'noise'")
        real = [pt for pt, p in zip(self.points, prov) if p == REAL]
        if len(set(real)) != len(real):
            raise ValueError("duplicate bins among real prompt points")

    def __len__(self) -> int:
        return len(self.points)

    def tokens(self) -> list[int]:
        out: list[int] = []
        for p in self.points:
            out.extend((p.xb, p.yb))
        return out


def extract_keypoints(g: LaneGraph, cfg: CodecConfig) -> PromptSet:
    """Quantized key points of all above-threshold lanes, best lanes first.

    Lanes with score >= the threshold are processed in descending score
    (ties by lane index). Each contributes its start (unless a selected
    predecessor feeds it) and its end; exact duplicate bins keep the first
    occurrence. If the total would pass K_max, that lane and all
    lower-ranked lanes are dropped whole. Missing scores default to 1.0.
    """
    m = len(g.lanes)
    scores = g.scores if g.scores is not None else tuple(1.0 for _ in range(m))
    selected = [i for i in range(m) if scores[i] >= cfg.score_threshold]
    binary = g.binarized(cfg)
    has_selected_pred = [
        any(binary[i][j] for i in selected if i != j) for j in range(m)
    ]
    points: list[QuantPoint] = []
    seen: set[QuantPoint] = set()
    for j in sorted(selected, key=lambda j: (-scores[j], j)):
        lane = g.lanes[j]
        candidates = []
        if not has_selected_pred[j]:
            candidates.append(quantize(lane.start.x, lane.start.y, cfg))
        candidates.append(quantize(lane.end.x, lane.end.y, cfg))
        fresh = []
        for q in candidates:
            if q not in seen and q not in fresh:
                fresh.append(q)
        if len(points) + len(fresh) > cfg.max_prompt_points:
            break
        points.extend(fresh)
        seen.update(fresh)
    return PromptSet(tuple(points), tuple(REAL for _ in points))


def shuffle_prompt(p: PromptSet, rng) -> PromptSet:
    """Uniform random permutation of the prompt; multiset unchanged."""
    seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = np.random.default_rng(rng)
    order = gen.permutation(len(p.points))
    return PromptSet(
        tuple(p.points[i] for i in order),
        tuple(p.provenance[i] for i in order),
        order_seed=int(seed) if seed is not None else p.order_seed,
    )
