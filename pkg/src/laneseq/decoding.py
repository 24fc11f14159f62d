"""Grammar-constrained decoding over externally supplied probabilities.

The engine never scores anything itself: a provider hands it one
distribution per position, the grammar masks illegal tokens, and the
chosen token advances an immutable DecoderState. The mask looks one step
ahead, so any coordinate it admits can still be completed into a legal
sextet and a run can always terminate with EOS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import vocab as V
from .codec import decode
from .config import CodecConfig, DEFAULT_CONFIG
from .errors import (
    AllMaskedZero,
    BadSlotToken,
    ConfigError,
    LengthMismatch,
    NonDistributionRow,
)
from .graph import KeyPointDag
from .vocab import Vocabulary

PROMPT = "prompt"
EDGES = "edges"
DONE = "done"


@dataclass(frozen=True)
class DecoderState:
    """Position in the sequence grammar; advanced one token at a time."""

    phase: str = EDGES
    partial: tuple[int, ...] = ()  # tokens of the unfinished sextet/pair
    kp_bins: tuple[tuple[int, int], ...] = ()  # emission-ordered key points
    edges: tuple[tuple[int, int], ...] = ()  # decoded (src, dst) key-point ids
    cursor: int | None = None  # key point realized by the previous sextet
    prompt_pairs: int = 0
    sextets: int = 0
    tokens: tuple[int, ...] = ()
    # descendant bitmask per key point, maintained by advance(); purely a
    # cache, so it is excluded from equality and rebuilt when stale
    reach: tuple[int, ...] = field(default=(), repr=False, compare=False)

    @classmethod
    def edge_start(cls) -> "DecoderState":
        """Initial state for decoding the edge region only."""
        return cls(phase=EDGES)

    @classmethod
    def sequence_start(cls) -> "DecoderState":
        """Initial state for a full [START] + prompt + [EOK] + edges stream."""
        return cls(phase=PROMPT)

    @property
    def slot(self) -> int:
        return len(self.partial)


@dataclass(frozen=True)
class StepMask:
    allowed: np.ndarray  # bool vector over the vocabulary

    def __post_init__(self):
        arr = np.asarray(self.allowed, dtype=bool)
        arr.setflags(write=False)
        object.__setattr__(self, "allowed", arr)

    def __contains__(self, token: int) -> bool:
        return 0 <= token < len(self.allowed) and bool(self.allowed[token])

    def ids(self) -> list[int]:
        return [int(i) for i in np.nonzero(self.allowed)[0]]


def _reach_of(s: DecoderState) -> tuple[int, ...]:
    """Descendant bitmasks, trusting the cached field when it is current."""
    if len(s.reach) == len(s.kp_bins):
        return s.reach
    masks = [0] * len(s.kp_bins)
    changed = True
    while changed:
        changed = False
        for src, dst in s.edges:
            want = masks[src] | (1 << dst) | masks[dst]
            if want != masks[src]:
                masks[src] = want
                changed = True
    return tuple(masks)


def _grow_reach(reach: tuple[int, ...], src: int, dst: int) -> tuple[int, ...]:
    """Reachability after adding edge src -> dst (dst may be a new node)."""
    masks = list(reach)
    while len(masks) <= max(src, dst):
        masks.append(0)
    gain = (1 << dst) | masks[dst]
    src_bit = 1 << src
    for u in range(len(masks)):
        if u == src or masks[u] & src_bit:
            masks[u] |= gain
    return tuple(masks)


def _clone_parents(s: DecoderState, target: int) -> list[int]:
    """1-based con values that can legally parent a clone edge into target."""
    blocked = _reach_of(s)[target] | (1 << target)
    return [c for c in range(1, len(s.kp_bins) + 1)
            if not blocked >> (c - 1) & 1]


def _has_clone_parent(reach: tuple[int, ...], count: int, target: int) -> bool:
    blocked = (reach[target] | (1 << target)) & ((1 << count) - 1)
    return blocked.bit_count() < count


def next_mask(s: DecoderState, cfg: CodecConfig) -> StepMask:
    """Allowed tokens at the next position; nonempty for every legal state."""
    vocab = Vocabulary.from_config(cfg)
    allow = np.zeros(vocab.size, dtype=bool)

    if s.phase == DONE:
        allow[vocab.pad] = True
        return StepMask(allow)

    if s.phase == PROMPT:
        if not s.tokens:
            allow[vocab.start] = True
        elif s.slot == 1:
            allow[: cfg.y_bins] = True
        else:
            if s.prompt_pairs < cfg.max_prompt_points:
                allow[: cfg.x_bins] = True
            allow[vocab.eok] = True
        return StepMask(allow)

    used = {b: i for i, b in enumerate(s.kp_bins)}
    can_new = len(s.kp_bins) < vocab.base - 1
    count = len(s.kp_bins)
    reach = _reach_of(s) if s.slot <= 2 else ()

    if s.slot == 0:
        allow[vocab.eos] = True
        if s.sextets < cfg.max_edges:
            if can_new:
                full_x = _saturated_columns(s.kp_bins, cfg)
                allow[: cfg.x_bins] = True
                for xb in full_x:
                    allow[xb] = False
            for (xb, _), i in used.items():
                if not allow[xb] and _has_clone_parent(reach, count, i):
                    allow[xb] = True
    elif s.slot == 1:
        xb = s.partial[0]
        if can_new:
            used_y = {b[1] for b in s.kp_bins if b[0] == xb}
            for yb in range(cfg.y_bins):
                if yb not in used_y:
                    allow[yb] = True
        for (bx, by), i in used.items():
            if bx == xb and not allow[by] and _has_clone_parent(reach, count, i):
                allow[by] = True
    elif s.slot == 2:
        cell = (s.partial[0], s.partial[1])
        if cell in used:
            if _has_clone_parent(reach, count, used[cell]):
                allow[vocab.clone] = True
        elif can_new:
            allow[vocab.ancestor] = True
            if s.cursor is not None:
                allow[vocab.lineal] = True
            if s.kp_bins:
                allow[vocab.offshoot] = True
    elif s.slot == 3:
        cls = vocab.class_code(s.partial[2])
        if cls in (V.ANCESTOR, V.LINEAL):
            allow[0] = True
        elif cls == V.OFFSHOOT:
            allow[1 : len(s.kp_bins) + 1] = True
        else:
            target = used[(s.partial[0], s.partial[1])]
            for c in _clone_parents(s, target):
                allow[c] = True
    elif s.slot == 4:
        allow[: cfg.x_bins] = True
    else:
        allow[: cfg.y_bins] = True
    return StepMask(allow)


def _saturated_columns(kp_bins, cfg: CodecConfig) -> set[int]:
    """x bins where every y bin is already a key point (no fresh cell left)."""
    counts: dict[int, int] = {}
    for xb, _ in kp_bins:
        counts[xb] = counts.get(xb, 0) + 1
    return {xb for xb, n in counts.items() if n >= cfg.y_bins}


def advance(s: DecoderState, token: int, cfg: CodecConfig) -> DecoderState:
    """Consume one token; raises BadSlotToken if the grammar forbids it."""
    token = int(token)
    if token not in next_mask(s, cfg):
        vocab = Vocabulary.from_config(cfg)
        raise BadSlotToken(
            f"{vocab.name(token)} is not legal at position {len(s.tokens)} "
            f"(phase {s.phase}, slot {s.slot})",
            len(s.tokens),
        )
    return _apply(s, token, cfg)


def _apply(s: DecoderState, token: int, cfg: CodecConfig) -> DecoderState:
    # token already vetted against the mask
    vocab = Vocabulary.from_config(cfg)
    tokens = s.tokens + (token,)

    if s.phase == DONE:
        return replace(s, tokens=tokens)
    if s.phase == PROMPT:
        if token == vocab.start:
            return replace(s, tokens=tokens)
        if token == vocab.eok:
            return replace(s, phase=EDGES, partial=(), tokens=tokens)
        partial = s.partial + (token,)
        if len(partial) == 2:
            return replace(s, partial=(), prompt_pairs=s.prompt_pairs + 1,
                           tokens=tokens)
        return replace(s, partial=partial, tokens=tokens)

    if token == vocab.eos and s.slot == 0:
        return replace(s, phase=DONE, tokens=tokens)
    partial = s.partial + (token,)
    if len(partial) < 6:
        return replace(s, partial=partial, tokens=tokens)

    xb, yb, cls_tok, con = partial[0], partial[1], partial[2], partial[3]
    cls = vocab.class_code(cls_tok)
    cell = (xb, yb)
    kp_bins, edges, cursor, reach = s.kp_bins, s.edges, s.cursor, _reach_of(s)
    if cls == V.CLONE:
        target = kp_bins.index(cell)
        edges = edges + ((con - 1, target),)
        reach = _grow_reach(reach, con - 1, target)
        cursor = target
    else:
        new_id = len(kp_bins)
        kp_bins = kp_bins + (cell,)
        if cls == V.LINEAL:
            edges = edges + ((s.cursor, new_id),)
            reach = _grow_reach(reach, s.cursor, new_id)
        elif cls == V.OFFSHOOT:
            edges = edges + ((con - 1, new_id),)
            reach = _grow_reach(reach, con - 1, new_id)
        else:
            reach = reach + (0,)
        cursor = new_id
    return replace(s, partial=(), kp_bins=kp_bins, edges=edges, cursor=cursor,
                   sextets=s.sextets + 1, tokens=tokens, reach=reach)


def step(s: DecoderState, probs, cfg: CodecConfig, mode: str = "greedy",
         rng=None) -> tuple[int, DecoderState]:
    """Mask, renormalize, pick one token, and advance the state."""
    vocab = Vocabulary.from_config(cfg)
    row = np.asarray(probs, dtype=float).reshape(-1)
    if row.shape[0] != vocab.size:
        raise LengthMismatch(f"distribution has {row.shape[0]} entries, "
                             f"vocabulary has {vocab.size}")
    if not np.all(np.isfinite(row)) or np.any(row < 0):
        raise NonDistributionRow("probabilities must be finite and nonnegative")
    mask = next_mask(s, cfg)
    masked = np.where(mask.allowed, row, 0.0)
    total = float(masked.sum())
    if total <= 0.0:
        raise AllMaskedZero(
            f"no probability mass on the {int(mask.allowed.sum())} legal tokens"
        )
    if mode == "greedy":
        token = int(np.argmax(masked))  # first maximum: lowest-id tie-break
    elif mode == "sample":
        gen = np.random.default_rng(rng)
        token = int(gen.choice(vocab.size, p=masked / total))
    else:
        raise ConfigError(f"unknown decoding mode {mode!r}")
    return token, _apply(s, token, cfg)


def run(source, cfg: CodecConfig, mode: str = "greedy",
        rng=None) -> tuple[list[int], KeyPointDag]:
    """Decode edge tokens until EOS; the mask guarantees a parseable stream.

    `source` is an iterable of per-position distributions or a callable
    taking the position index. The edge budget forces EOS by position
    6*E_max, so at most 6*E_max+1 distributions are consumed.
    """
    if callable(source):
        provider = source
    else:
        it = iter(source)
        provider = lambda _i: next(it)
    vocab = Vocabulary.from_config(cfg)
    gen = np.random.default_rng(rng) if mode == "sample" else None
    state = DecoderState.edge_start()
    tokens: list[int] = []
    while True:
        try:
            row = provider(len(tokens))
        except StopIteration:
            raise LengthMismatch(
                f"probability source ended after {len(tokens)} positions, "
                "before <eos> was reached"
            ) from None
        token, state = step(state, row, cfg, mode=mode, rng=gen)
        tokens.append(token)
        if token == vocab.eos:
            break
    return tokens, decode(tokens, cfg, strict=True)


def sequence_nll(tokens, table, weights=None,
                 cfg: CodecConfig = DEFAULT_CONFIG) -> float:
    """Class-weighted negative log-likelihood, skipping PAD positions.

    `weights` maps class names ("ancestor", "lineal", "offshoot", "clone",
    "ncls") to multipliers applied where the target token is that class;
    every other position weighs 1.0. Rows at PAD positions are never read.
    """
    vocab = Vocabulary.from_config(cfg)
    weights = dict(weights or {})
    known = set(V.CLASS_NAMES) | {"ncls"}
    unknown = set(weights) - known
    if unknown:
        raise ConfigError(f"unknown class-weight keys {sorted(unknown)}")

    table = np.asarray(table, dtype=float)
    if table.ndim != 2 or table.shape[0] != len(tokens):
        raise LengthMismatch(
            f"table shape {table.shape} does not cover {len(tokens)} target tokens"
        )
    if table.shape[1] != vocab.size:
        raise LengthMismatch(f"table has {table.shape[1]} columns, "
                             f"vocabulary has {vocab.size}")
    total = 0.0
    for pos, raw in enumerate(tokens):
        t = int(raw)
        if not 0 <= t < vocab.size:
            raise ValueError(f"token {t} at position {pos} is outside the vocabulary")
        if t == vocab.pad:
            continue
        row = table[pos]
        rowsum = float(row.sum())
        if not np.all(np.isfinite(row)) or np.any(row < 0) or rowsum <= 0.0:
            raise NonDistributionRow(f"row {pos} is not a probability distribution")
        p = float(row[t]) / rowsum
        if vocab.is_class(t):
            w = float(weights.get(V.CLASS_NAMES[vocab.class_code(t)], 1.0))
        elif t == vocab.ncls:
            w = float(weights.get("ncls", 1.0))
        else:
            w = 1.0
        total += w * (math.inf if p == 0.0 else -math.log(p))
    return total
