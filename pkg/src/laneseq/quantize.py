"""Uniform discretization between metric BEV coordinates and grid bins.

One bin equals one BEV grid cell, so a coordinate token is also a cell
index. Quantization floors into the grid and clamps at both ends;
dequantization returns the cell center, bounding reconstruction error by
half a bin width per axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import CodecConfig
from .errors import BinOutOfRange, NonFiniteCoordinate


@dataclass(frozen=True, order=True)
class QuantPoint:
    xb: int
    yb: int


def _to_bin(value: float, lo: float, hi: float, bins: int) -> int:
    b = math.floor((value - lo) / (hi - lo) * bins)
    return min(max(b, 0), bins - 1)


def quantize(x: float, y: float, cfg: CodecConfig) -> QuantPoint:
    """Map a metric (x, y) to its grid cell, clamping out-of-range values."""
    if not (math.isfinite(x) and math.isfinite(y)):
        raise NonFiniteCoordinate(f"cannot quantize non-finite point ({x}, {y})")
    return QuantPoint(
        _to_bin(x, cfg.x_range[0], cfg.x_range[1], cfg.x_bins),
        _to_bin(y, cfg.y_range[0], cfg.y_range[1], cfg.y_bins),
    )


def dequantize(q: QuantPoint, cfg: CodecConfig) -> tuple[float, float]:
    """Return the metric center of a grid cell."""
    if not (0 <= q.xb < cfg.x_bins and 0 <= q.yb < cfg.y_bins):
        raise BinOutOfRange(f"bin ({q.xb}, {q.yb}) outside {cfg.x_bins}x{cfg.y_bins} grid")
    x = cfg.x_range[0] + (q.xb + 0.5) * cfg.bin_width_x
    y = cfg.y_range[0] + (q.yb + 0.5) * cfg.bin_width_y
    return x, y
