"""Flat-array bindings over the laneseq codec.

Everything crossing this boundary is a flat numpy array plus explicit
dimensions: coordinates interleave as (x, y) or (x, y, z), edges as
(src, dst) pairs, probability tables as row-major floats with (rows, cols)
passed alongside. No core object leaves this module. All wrappers are
stateless delegations to pure core functions, so concurrent calls from
multiple threads are safe, and core exceptions propagate unchanged (the
exception class name is the core error name).
"""

from __future__ import annotations

import numpy as np

import laneseq
from laneseq import (
    DEFAULT_CONFIG,
    CodecConfig,
    DagEdge,
    DecoderState,
    KeyPointDag,
    LaneGraph,
    PromptSet,
    QuantPoint,
    Vocabulary,
    dag_to_lanegraph,
)

__version__ = laneseq.__version__

# identical fields and validation; config never crosses as an array
BoundConfig = CodecConfig

__all__ = [
    "BoundConfig",
    "__version__",
    "assemble_pair",
    "decode",
    "encode",
    "extract_prompt",
    "next_mask",
    "sequence_nll",
    "shuffle_prompt",
    "step",
]


def _cfg(config: CodecConfig | None) -> CodecConfig:
    return DEFAULT_CONFIG if config is None else config


def _pairs(flat, what: str) -> np.ndarray:
    arr = np.asarray(flat)
    if arr.ndim != 1 or arr.size % 2:
        raise ValueError(f"{what} must be a flat array of (a, b) pairs")
    return arr.reshape(-1, 2)


def _dag(points, edges, controls) -> KeyPointDag:
    pts = _pairs(np.asarray(points, dtype=float), "points")
    egs = _pairs(np.asarray(edges, dtype=np.int64), "edges")
    ctl = _pairs(np.asarray(controls, dtype=float), "controls")
    if len(ctl) != len(egs):
        raise ValueError(f"{len(egs)} edges need {len(egs)} control pairs, got {len(ctl)}")
    return KeyPointDag(
        [(float(x), float(y)) for x, y in pts],
        [DagEdge(int(s), int(d), (float(cx), float(cy)))
         for (s, d), (cx, cy) in zip(egs, ctl)],
    )


def encode(points, edges, controls, config: CodecConfig | None = None) -> np.ndarray:
    """Padded token line for one DAG given as flat arrays.

    points: float (2n,) as (x, y) pairs; edges: int (2m,) as (src, dst)
    pairs; controls: float (2m,) as (cx, cy) pairs, one per edge. Returns
    int64 (6*max_edges + 1,), identical to one CLI encode output line.
    """
    cfg = _cfg(config)
    seq = laneseq.encode(_dag(points, edges, controls), cfg)
    return np.asarray(seq.to_tokens(cfg), dtype=np.int64)


def decode(tokens, config: CodecConfig | None = None,
           strict: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Token line back to (points, edges, controls) flat arrays."""
    cfg = _cfg(config)
    d = laneseq.decode([int(t) for t in np.asarray(tokens).reshape(-1)], cfg,
                       strict=strict)
    points = np.array([v for p in d.keypoints for v in (p.x, p.y)], dtype=float)
    edges = np.array([v for e in d.edges for v in (e.src, e.dst)], dtype=np.int64)
    controls = np.array([v for e in d.edges for v in e.control], dtype=float)
    return points, edges, controls


def _lanegraph(lane_points, lane_offsets, adjacency, scores) -> LaneGraph:
    flat = np.asarray(lane_points, dtype=float)
    if flat.ndim != 1 or flat.size % 3:
        raise ValueError("lane_points must be a flat array of (x, y, z) triples")
    pts = flat.reshape(-1, 3)
    offsets = np.asarray(lane_offsets, dtype=np.int64)
    lanes = [
        [tuple(p) for p in pts[offsets[i]:offsets[i + 1]]]
        for i in range(len(offsets) - 1)
    ]
    m = len(lanes)
    adj = np.asarray(adjacency, dtype=float).reshape(m, m)
    return LaneGraph(lanes, adj, None if scores is None else list(scores))


def extract_prompt(lane_points, lane_offsets, adjacency, scores=None,
                   config: CodecConfig | None = None) -> np.ndarray:
    """Key-point prompt bins for a lane graph given as flat arrays.

    lane_points: float (3*total,) as (x, y, z) triples; lane_offsets:
    int (m+1,) prefix offsets into the point list; adjacency: float (m*m,)
    row-major. Returns int64 (2k,) interleaved (x_bin, y_bin).
    """
    prompt = laneseq.extract_keypoints(
        _lanegraph(lane_points, lane_offsets, adjacency, scores), _cfg(config))
    return np.asarray(prompt.tokens(), dtype=np.int64)


def shuffle_prompt(bins, seed: int) -> np.ndarray:
    """Seeded permutation of flat (x_bin, y_bin) prompt pairs."""
    points = [QuantPoint(int(x), int(y)) for x, y in _pairs(bins, "bins")]
    shuffled = laneseq.shuffle_prompt(PromptSet(tuple(points)), int(seed))
    return np.asarray(shuffled.tokens(), dtype=np.int64)


def assemble_pair(points, edges, controls, seed: int,
                  config: CodecConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Aligned training input/target token lines for one DAG.

    Same flat layout as ``encode``; the prompt is derived from the DAG's
    lane-graph form exactly as the CLI does. Returns two int64 arrays of
    1 + 2*max_prompt_points + 1 + 6*max_edges tokens each.
    """
    cfg = _cfg(config)
    dag = _dag(points, edges, controls)
    gt = laneseq.encode(dag, cfg)
    prompt = laneseq.extract_keypoints(dag_to_lanegraph(dag, cfg), cfg)
    rng = np.random.default_rng(int(seed))
    inp, tgt = laneseq.assemble_training_pair(gt, prompt, cfg, rng)
    return np.asarray(inp, dtype=np.int64), np.asarray(tgt, dtype=np.int64)


def _replay(prefix, cfg: CodecConfig, whole_sequence: bool) -> DecoderState:
    state = (DecoderState.sequence_start() if whole_sequence
             else DecoderState.edge_start())
    for t in np.asarray(prefix, dtype=np.int64).reshape(-1):
        state = laneseq.advance(state, int(t), cfg)
    return state


def next_mask(prefix, config: CodecConfig | None = None,
              whole_sequence: bool = False) -> np.ndarray:
    """Legality mask after a token prefix: int8 (vocab_size,), 1 = allowed.

    The prefix replays the edge grammar; pass whole_sequence=True to start
    before START and include the prompt region.
    """
    cfg = _cfg(config)
    mask = laneseq.next_mask(_replay(prefix, cfg, whole_sequence), cfg)
    return mask.allowed.astype(np.int8)


def step(prefix, row, mode: str = "greedy", seed=None,
         config: CodecConfig | None = None, whole_sequence: bool = False) -> int:
    """One constrained decoding step: pick a legal token from one flat row."""
    cfg = _cfg(config)
    state = _replay(prefix, cfg, whole_sequence)
    token, _ = laneseq.step(state, np.asarray(row, dtype=float).reshape(-1),
                            cfg, mode=mode, rng=seed)
    return int(token)


def sequence_nll(tokens, probs, rows: int, cols: int, weights=None,
                 config: CodecConfig | None = None) -> float:
    """Class-weighted NLL of a token line under a flat probability table."""
    table = np.asarray(probs, dtype=float).reshape(int(rows), int(cols))
    return float(laneseq.sequence_nll(
        [int(t) for t in np.asarray(tokens).reshape(-1)], table,
        weights=weights, cfg=_cfg(config)))
