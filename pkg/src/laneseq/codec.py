"""DAG <-> token-sequence codec and training-pair assembly.

Every sextet realizes one key point: its bins, a class describing how it
attaches to what came before, a parent index, and the control-point bins
of the incoming curve. Serialization order is a deterministic DFS from
the right-front root; decoding replays the same rules in reverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import vocab as V
from .config import CodecConfig
from .errors import (
    BadSlotToken,
    BudgetExceeded,
    CloneAmbiguity,
    CloneTargetMissing,
    ConOutOfRange,
    CycleDetected,
    InvalidDag,
    LinealWithoutPrevious,
    MissingEos,
    TooManyEdges,
    TooManyKeypoints,
    TruncatedSextet,
)
from .graph import DagEdge, KeyPointDag, Point3, validate_dag
from .prompts import PromptSet, shuffle_prompt
from .quantize import QuantPoint, dequantize, quantize
from .vocab import Vocabulary


@dataclass(frozen=True)
class EdgeSextet:
    """Six integers: key-point bins, class code, parent index, control bins."""

    xb: int
    yb: int
    cls: int  # 0..3, see vocab.CLASS_NAMES
    con: int  # 0 for ancestor/lineal, else 1-based parent key-point index
    bxb: int
    byb: int

    def tokens(self, vocab: Vocabulary) -> tuple[int, ...]:
        return (self.xb, self.yb, vocab.class_token(self.cls), self.con, self.bxb, self.byb)


@dataclass(frozen=True)
class EdgeSequence:
    sextets: tuple[EdgeSextet, ...]

    def __len__(self) -> int:
        return len(self.sextets)

    def to_tokens(self, cfg: CodecConfig, pad: bool = True) -> list[int]:
        """Flattened ids terminated by EOS; padded to 6*E_max+1 by default."""
        vocab = Vocabulary.from_config(cfg)
        budget = cfg.edge_token_budget
        out: list[int] = []
        for s in self.sextets:
            out.extend(s.tokens(vocab))
        out.append(vocab.eos)
        if len(out) > budget:
            raise TooManyEdges(
                f"{len(self.sextets)} sextets need {len(out)} tokens, budget is {budget}"
            )
        if pad:
            out.extend([vocab.pad] * (budget - len(out)))
        return out


def _order_key(q: QuantPoint) -> tuple[int, int]:
    # right-front first: largest forward bin, then smallest lateral bin
    return (-q.xb, q.yb)


def encode(d: KeyPointDag, cfg: CodecConfig) -> EdgeSequence:
    """Serialize a valid KeyPointDag into its canonical sextet sequence.

    Roots (in-degree 0, out-degree > 0) are visited right-front first and
    introduced with an ANCESTOR sextet whose control bins repeat its own
    bins. DFS then emits one sextet per edge: LINEAL when the source is
    the cursor (the key point of the previous sextet), OFFSHOOT otherwise,
    CLONE when the target was already emitted. New key points take 1-based
    indices in emission order; clones consume none.
    """
    violations = validate_dag(d, cfg)
    if violations:
        if any(v.rule == "Cycle" for v in violations):
            raise CycleDetected(f"input graph is cyclic: {[str(v) for v in violations]}")
        raise InvalidDag(violations)

    k = len(d.keypoints)
    indeg = [0] * k
    out_edges: list[list[DagEdge]] = [[] for _ in range(k)]
    for e in d.edges:
        indeg[e.dst] += 1
        out_edges[e.src].append(e)

    touched = sorted({i for e in d.edges for i in (e.src, e.dst)})
    bins = {i: quantize(d.keypoints[i].x, d.keypoints[i].y, cfg) for i in touched}
    seen_bins: dict[QuantPoint, int] = {}
    for i in touched:
        if bins[i] in seen_bins:
            raise CloneAmbiguity(
                f"key points {seen_bins[bins[i]]} and {i} share cell "
                f"({bins[i].xb}, {bins[i].yb}); re-merge with a larger tolerance"
            )
        seen_bins[bins[i]] = i

    cap = Vocabulary.from_config(cfg).base - 1
    if len(touched) > cap:
        raise TooManyKeypoints(f"{len(touched)} key points, parent indices only reach {cap}")

    roots = sorted((i for i in touched if indeg[i] == 0 and out_edges[i]),
                   key=lambda i: _order_key(bins[i]))
    n_sextets = len(roots) + len(d.edges)
    if n_sextets > cfg.max_edges:
        raise TooManyEdges(f"{n_sextets} sextets exceed the {cfg.max_edges} budget")

    for lst in out_edges:
        lst.sort(key=lambda e: _order_key(bins[e.dst]))

    index: dict[int, int] = {}  # keypoint id -> 1-based emission index
    sextets: list[EdgeSextet] = []
    prev = -1

    def control_bins(e: DagEdge) -> QuantPoint:
        return quantize(e.control[0], e.control[1], cfg)

    for r in roots:
        index[r] = len(index) + 1
        sextets.append(EdgeSextet(bins[r].xb, bins[r].yb, V.ANCESTOR, 0,
                                  bins[r].xb, bins[r].yb))
        prev = r
        stack = [iter(out_edges[r])]
        while stack:
            e = next(stack[-1], None)
            if e is None:
                stack.pop()
                continue
            qb, cb = bins[e.dst], control_bins(e)
            if e.dst not in index:
                if e.src == prev:
                    cls, con = V.LINEAL, 0
                else:
                    cls, con = V.OFFSHOOT, index[e.src]
                index[e.dst] = len(index) + 1
                sextets.append(EdgeSextet(qb.xb, qb.yb, cls, con, cb.xb, cb.yb))
                prev = e.dst
                stack.append(iter(out_edges[e.dst]))
            else:
                sextets.append(EdgeSextet(qb.xb, qb.yb, V.CLONE, index[e.src], cb.xb, cb.yb))
                prev = e.dst
    return EdgeSequence(tuple(sextets))


@dataclass(frozen=True)
class SequenceViolation:
    """One malformed spot in a token stream."""

    rule: str
    token_index: int
    message: str = ""

    def __str__(self) -> str:
        return f"{self.rule}@{self.token_index}"


_VIOLATION_ERRORS = {
    "TruncatedSextet": TruncatedSextet,
    "MissingEos": MissingEos,
    "BadSlotToken": BadSlotToken,
    "ConOutOfRange": ConOutOfRange,
    "CloneTargetMissing": CloneTargetMissing,
    "LinealWithoutPrevious": LinealWithoutPrevious,
}


class _SequenceReader:
    """Shared walker for strict decode, lenient decode, and validation."""

    def __init__(self, tokens, cfg: CodecConfig, strict: bool):
        self.tokens = [int(t) for t in tokens]
        self.cfg = cfg
        self.vocab = Vocabulary.from_config(cfg)
        self.strict = strict
        self.violations: list[SequenceViolation] = []
        self.kp_bins: list[QuantPoint] = []
        self.by_bins: dict[QuantPoint, int] = {}  # bins -> 0-based keypoint id
        self.edges: list[tuple[int, int, QuantPoint]] = []
        self.reach: list[int] = []  # descendant bitmask per keypoint
        self.prev: int | None = None

    def fail(self, rule: str, idx: int, message: str):
        if self.strict:
            raise _VIOLATION_ERRORS[rule](message, idx)
        self.violations.append(SequenceViolation(rule, idx, message))

    def reaches(self, start: int, goal: int) -> bool:
        """True if `goal` is reachable from `start` over decoded edges."""
        return bool(self.reach[start] >> goal & 1)

    def link(self, src: int, dst: int, control: QuantPoint):
        self.edges.append((src, dst, control))
        gain = (1 << dst) | self.reach[dst]
        src_bit = 1 << src
        for u in range(len(self.reach)):
            if u == src or self.reach[u] & src_bit:
                self.reach[u] |= gain

    def run(self) -> KeyPointDag:
        toks, v = self.tokens, self.vocab
        i, n = 0, len(toks)
        saw_eos = False
        while i < n:
            if toks[i] == v.eos:
                saw_eos = True
                i += 1
                break
            if i + 6 > n:
                self.fail("TruncatedSextet", i,
                          f"sequence ends {n - i} token(s) into a sextet")
                i = n
                break
            self.read_sextet(toks[i:i + 6], i)
            i += 6
        if not saw_eos and i >= n:
            self.fail("MissingEos", n, "sequence ended without <eos>")
        for j in range(i, n):
            if toks[j] != v.pad:
                self.fail("BadSlotToken", j,
                          f"{v.name(toks[j])} after <eos>; only <pad> may follow")
        centers = [dequantize(q, self.cfg) for q in self.kp_bins]
        keypoints = tuple(Point3(x, y, 0.0) for x, y in centers)
        edges = tuple(
            DagEdge(s, t, dequantize(c, self.cfg)) for s, t, c in self.edges
        )
        return KeyPointDag(keypoints, edges)

    def read_sextet(self, g: list[int], at: int):
        v, cfg = self.vocab, self.cfg
        xb, yb, cls_tok, con, bxb, byb = g
        for off, (val, limit, what) in enumerate(
            [(xb, cfg.x_bins, "x bin"), (yb, cfg.y_bins, "y bin")]
        ):
            if not 0 <= val < limit:
                return self.fail("BadSlotToken", at + off,
                                 f"{v.name(val)} is not a valid {what}")
        if not (v.is_class(cls_tok) or cls_tok == v.ncls):
            return self.fail("BadSlotToken", at + 2,
                             f"{v.name(cls_tok)} in the class slot")
        if not 0 <= con < v.base:
            return self.fail("BadSlotToken", at + 3,
                             f"{v.name(con)} in the connection slot")
        if not 0 <= bxb < cfg.x_bins:
            return self.fail("BadSlotToken", at + 4,
                             f"{v.name(bxb)} is not a valid control x bin")
        if not 0 <= byb < cfg.y_bins:
            return self.fail("BadSlotToken", at + 5,
                             f"{v.name(byb)} is not a valid control y bin")
        if cls_tok == v.ncls:
            return  # marked noise: validated but never materialized
        cls = v.class_code(cls_tok)
        q, cq = QuantPoint(xb, yb), QuantPoint(bxb, byb)
        count = len(self.kp_bins)

        if cls == V.CLONE:
            if not 1 <= con <= count:
                return self.fail("ConOutOfRange", at + 3,
                                 f"con {con} outside 1..{count}")
            if q not in self.by_bins:
                return self.fail("CloneTargetMissing", at + 2,
                                 f"no emitted key point at cell ({xb}, {yb})")
            target, parent = self.by_bins[q], con - 1
            if parent == target:
                return self.fail("ConOutOfRange", at + 3,
                                 f"con {con} points the clone edge at itself")
            if self.reaches(target, parent):
                return self.fail("ConOutOfRange", at + 3,
                                 f"con {con} would close a directed cycle")
            self.link(parent, target, cq)
            self.prev = target
            return

        # ancestor / lineal / offshoot realize a new key point
        if q in self.by_bins:
            return self.fail("BadSlotToken", at + 2,
                             f"<{V.CLASS_NAMES[cls]}> at cell ({xb}, {yb}) which is "
                             "already a key point; only <clone> may revisit")
        if count >= v.base - 1:
            return self.fail("BadSlotToken", at + 2,
                             f"key point capacity {v.base - 1} reached")
        if cls == V.LINEAL and self.prev is None:
            return self.fail("LinealWithoutPrevious", at + 2,
                             "<lineal> before any key point was emitted")
        if cls in (V.ANCESTOR, V.LINEAL):
            if con != 0:
                return self.fail("ConOutOfRange", at + 3,
                                 f"con must be 0 for <{V.CLASS_NAMES[cls]}>, got {con}")
        elif not 1 <= con <= count:
            return self.fail("ConOutOfRange", at + 3, f"con {con} outside 1..{count}")

        new_id = count
        self.kp_bins.append(q)
        self.by_bins[q] = new_id
        self.reach.append(0)
        if cls == V.LINEAL:
            self.link(self.prev, new_id, cq)
        elif cls == V.OFFSHOOT:
            self.link(con - 1, new_id, cq)
        self.prev = new_id


def decode(tokens, cfg: CodecConfig, strict: bool = True) -> KeyPointDag:
    """Parse a token stream back into a KeyPointDag at bin-center precision.

    Strict mode raises on the first malformed token; lenient mode skips
    malformed sextets (use validate_sequence to enumerate what was skipped).
    """
    return _SequenceReader(tokens, cfg, strict).run()


def validate_sequence(tokens, cfg: CodecConfig) -> list[SequenceViolation]:
    """All rule violations in the stream; empty iff strict decode succeeds."""
    reader = _SequenceReader(tokens, cfg, strict=False)
    reader.run()
    return reader.violations


@dataclass(frozen=True)
class RoundTripReport:
    topology_exact: bool
    max_deviation: float  # meters, per-coordinate, inf when topology differs
    detail: str = ""


def compare_roundtrip(original: KeyPointDag, decoded: KeyPointDag,
                      cfg: CodecConfig) -> RoundTripReport:
    """Check decode(encode(d)) against d: same structure, bounded drift.

    Key points correspond through their quantizer cells (encode keeps them
    distinct); edges must agree as a multiset under that correspondence.
    Deviation is the largest per-axis distance between an original
    coordinate (key point or control) and its decoded bin center. Isolated
    key points never enter the token stream and are ignored.
    """
    touched = sorted({i for e in original.edges for i in (e.src, e.dst)})
    orig_bins = {i: quantize(original.keypoints[i].x, original.keypoints[i].y, cfg)
                 for i in touched}
    dec_bins = {quantize(p.x, p.y, cfg): i for i, p in enumerate(decoded.keypoints)}
    if set(orig_bins.values()) != set(dec_bins) or \
            len(dec_bins) != len(decoded.keypoints):
        return RoundTripReport(False, float("inf"), "key-point cells differ")
    to_dec = {i: dec_bins[b] for i, b in orig_bins.items()}

    def edge_map(edges, mapper):
        grouped: dict[tuple[int, int], list[tuple[float, float]]] = {}
        for e in edges:
            grouped.setdefault((mapper(e.src), mapper(e.dst)), []).append(
                (e.control[0], e.control[1]))
        return {k: sorted(v) for k, v in grouped.items()}

    orig_edges = edge_map(original.edges, lambda i: to_dec[i])
    dec_edges = edge_map(decoded.edges, lambda i: i)
    if set(orig_edges) != set(dec_edges) or any(
            len(orig_edges[k]) != len(dec_edges[k]) for k in orig_edges):
        return RoundTripReport(False, float("inf"), "edge relations differ")

    dev = 0.0
    for i in touched:
        p, q = original.keypoints[i], decoded.keypoints[to_dec[i]]
        dev = max(dev, abs(p.x - q.x), abs(p.y - q.y))
    for k in orig_edges:
        for (ox, oy), (dx, dy) in zip(orig_edges[k], dec_edges[k]):
            dev = max(dev, abs(ox - dx), abs(oy - dy))
    return RoundTripReport(True, dev)


def assemble_training_pair(gt: EdgeSequence, prompt: PromptSet, cfg: CodecConfig,
                           rng) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Build the aligned next-token input/target pair for one sample.

    Input:  [START] + K_max shuffled prompt pairs + [EOK] + real sextets +
            noise sextets filling the edge region to E_max.
    Target: PAD across the whole prompt region, each real sextet verbatim,
            noise sextets as PAD except NCLS in the class slot, then EOS.
    Target position t supervises the prediction made after consuming input
    tokens 0..t, so with defaults both lines are exactly 802 tokens.

    Noise sextets draw uniform bins and a uniform real class (con uniform
    over the valid parent range); their bins are injected into the prompt,
    which is then topped up to exactly K_max points and shuffled with the
    same rng.
    """
    vocab = Vocabulary.from_config(cfg)
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    n_real = len(gt.sextets)
    if n_real > cfg.max_edges:
        raise BudgetExceeded(f"{n_real} real sextets exceed E_max={cfg.max_edges}")
    if len(prompt.points) > cfg.max_prompt_points:
        raise BudgetExceeded(
            f"{len(prompt.points)} prompt points exceed K_max={cfg.max_prompt_points}"
        )

    kp_count = sum(1 for s in gt.sextets if s.cls != V.CLONE)
    noise: list[EdgeSextet] = []
    for _ in range(cfg.max_edges - n_real):
        xb = int(rng.integers(0, cfg.x_bins))
        yb = int(rng.integers(0, cfg.y_bins))
        cls = int(rng.integers(0, 4)) if kp_count > 0 else V.ANCESTOR
        con = 0
        if cls in (V.OFFSHOOT, V.CLONE):
            con = int(rng.integers(1, kp_count + 1))
        bxb = int(rng.integers(0, cfg.x_bins))
        byb = int(rng.integers(0, cfg.y_bins))
        if cls != V.CLONE:
            kp_count += 1
        noise.append(EdgeSextet(xb, yb, cls, con, bxb, byb))

    points = list(prompt.points)
    provenance = list(prompt.provenance)
    room = cfg.max_prompt_points - len(points)
    for s in noise[:room]:
        points.append(QuantPoint(s.xb, s.yb))
        provenance.append("noise")
    while len(points) < cfg.max_prompt_points:
        points.append(QuantPoint(int(rng.integers(0, cfg.x_bins)),
                                 int(rng.integers(0, cfg.y_bins))))
        provenance.append("noise")
    shuffled = shuffle_prompt(PromptSet(tuple(points), tuple(provenance)), rng)

    input_tokens: list[int] = [vocab.start]
    for p in shuffled.points:
        input_tokens.extend((p.xb, p.yb))
    input_tokens.append(vocab.eok)
    # shifted alignment: the last PAD here supervises predicting EOK itself
    target_tokens: list[int] = [vocab.pad] * (len(input_tokens) - 1)
    for s in gt.sextets:
        toks = s.tokens(vocab)
        input_tokens.extend(toks)
        target_tokens.extend(toks)
    for s in noise:
        input_tokens.extend(s.tokens(vocab))
        target_tokens.extend((vocab.pad, vocab.pad, vocab.ncls,
                              vocab.pad, vocab.pad, vocab.pad))
    target_tokens.append(vocab.eos)
    return tuple(input_tokens), tuple(target_tokens)
