"""Desk-scale lane-graph evaluation: detection, topology, endpoint gaps.

Deliberately simplified stand-ins for the full benchmark machinery:
greedy score-descending matching at Fréchet thresholds {1, 2, 3} m,
average precision for detection, pairwise-connectivity F1 for topology,
and their geometric mean as the aggregate score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import CodecConfig, DEFAULT_CONFIG
from .graph import LaneGraph

THRESHOLDS = (1.0, 2.0, 3.0)


def frechet(a, b) -> float:
    """Discrete Fréchet distance between two polylines (any dimension)."""
    pa = np.asarray(a, dtype=float)
    pb = np.asarray(b, dtype=float)
    if pa.ndim != 2 or pb.ndim != 2 or len(pa) < 2 or len(pb) < 2:
        raise ValueError("polylines need at least 2 points each")
    d = np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=2)
    n, m = d.shape
    ca = np.empty((n, m))
    ca[0, 0] = d[0, 0]
    for j in range(1, m):
        ca[0, j] = max(ca[0, j - 1], d[0, j])
    for i in range(1, n):
        ca[i, 0] = max(ca[i - 1, 0], d[i, 0])
        for j in range(1, m):
            ca[i, j] = max(d[i, j], min(ca[i - 1, j], ca[i, j - 1], ca[i - 1, j - 1]))
    return float(ca[n - 1, m - 1])


@dataclass(frozen=True)
class EvalReport:
    det_score: float
    top_score: float
    ols_star: float
    endpoint_gap_mean: float
    thresholds: tuple[float, ...]
    det_by_threshold: tuple[float, ...]
    top_by_threshold: tuple[float, ...]

    def to_json_dict(self) -> dict:
        return {
            "det": self.det_score,
            "top": self.top_score,
            "ols_star": self.ols_star,
            "endpoint_gap_mean": self.endpoint_gap_mean,
            "thresholds": list(self.thresholds),
            "det_by_threshold": list(self.det_by_threshold),
            "top_by_threshold": list(self.top_by_threshold),
        }


def _lane_array(lane) -> np.ndarray:
    return np.array([(p.x, p.y, p.z) for p in lane.points])


def evaluate(pred: LaneGraph, gt: LaneGraph,
             cfg: CodecConfig = DEFAULT_CONFIG) -> EvalReport:
    """Score a predicted lane graph against ground truth.

    Greedy matching walks predictions by descending score and pairs each
    with its nearest unmatched GT lane; a pair counts when the Fréchet
    distance is within the threshold. A predicted connectivity pair is a
    true positive only when both lanes matched GT lanes that the GT
    adjacency also connects.
    """
    np_, ng = len(pred.lanes), len(gt.lanes)
    scores = pred.scores if pred.scores is not None else tuple(1.0 for _ in range(np_))
    order = sorted(range(np_), key=lambda i: (-scores[i], i))
    pred_pts = [_lane_array(l) for l in pred.lanes]
    gt_pts = [_lane_array(l) for l in gt.lanes]
    dist = np.array([[frechet(p, q) for q in gt_pts] for p in pred_pts]) \
        if np_ and ng else np.zeros((np_, ng))

    pred_bin = pred.binarized(cfg)
    gt_bin = gt.binarized(cfg)
    pred_pairs = [(i, j) for i in range(np_) for j in range(np_) if pred_bin[i][j]]
    gt_pairs = {(i, j) for i in range(ng) for j in range(ng) if gt_bin[i][j]}

    det_by_thr: list[float] = []
    top_by_thr: list[float] = []
    for thr in THRESHOLDS:
        match: dict[int, int] = {}
        taken: set[int] = set()
        tp_flags = []
        for i in order:
            best, best_d = -1, math.inf
            for j in range(ng):
                if j not in taken and dist[i, j] < best_d:
                    best, best_d = j, dist[i, j]
            if best >= 0 and best_d <= thr:
                match[i] = best
                taken.add(best)
                tp_flags.append(True)
            else:
                tp_flags.append(False)
        if ng == 0:
            ap = 1.0 if np_ == 0 else 0.0
        else:
            tp = 0
            ap = 0.0
            for rank, flag in enumerate(tp_flags, start=1):
                if flag:
                    tp += 1
                    ap += tp / rank
            ap /= ng
        det_by_thr.append(ap)

        pair_tp = sum(
            1 for i, j in pred_pairs
            if i in match and j in match and (match[i], match[j]) in gt_pairs
        )
        precision = pair_tp / len(pred_pairs) if pred_pairs else 1.0
        recall = pair_tp / len(gt_pairs) if gt_pairs else 1.0
        f1 = 0.0 if precision + recall == 0 else \
            2 * precision * recall / (precision + recall)
        top_by_thr.append(f1)

    det = sum(det_by_thr) / len(THRESHOLDS)
    top = sum(top_by_thr) / len(THRESHOLDS)
    ols = min(1.0, max(0.0, math.sqrt(det * top)))

    gaps = [
        float(np.linalg.norm(_lane_array(pred.lanes[i])[-1] - _lane_array(pred.lanes[j])[0]))
        for i, j in pred_pairs
    ]
    gap_mean = float(sum(gaps) / len(gaps)) if gaps else 0.0
    return EvalReport(det, top, ols, gap_mean, THRESHOLDS,
                      tuple(det_by_thr), tuple(top_by_thr))
