"""Codec configuration: BEV extent, grid resolution, and sequence budgets."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .errors import ConfigError


@dataclass(frozen=True)
class CodecConfig:
    """All knobs shared by the quantizer, codec, prompt builder and decoder.

    Defaults match a 100 m x 50 m ego-centric grid at 0.5 m resolution with
    budgets of 100 edges and 100 prompt points, i.e. 802-token training pairs.
    """

    x_range: tuple[float, float] = (-50.0, 50.0)
    y_range: tuple[float, float] = (-25.0, 25.0)
    x_bins: int = 200
    y_bins: int = 100
    max_edges: int = 100          # sextet budget per sequence
    max_prompt_points: int = 100  # key-point budget per prompt
    merge_tolerance: float = 0.5  # meters; key points closer than this merge
    score_threshold: float = 0.3  # lanes below this confidence are dropped
    adjacency_threshold: float = 0.5  # probabilistic adjacency binarization
    points_per_lane: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in ("x_range", "y_range"):
            rng = getattr(self, name)
            try:
                lo, hi = (float(v) for v in rng)
            except (TypeError, ValueError):
                raise ConfigError(f"{name} must be a (min, max) pair, got {rng!r}") from None
            object.__setattr__(self, name, (lo, hi))
        if self.x_bins < 1 or self.y_bins < 1:
            raise ConfigError(f"bin counts must be >= 1, got {self.x_bins}x{self.y_bins}")
        if self.max_edges < 1 or self.max_prompt_points < 1:
            raise ConfigError("max_edges and max_prompt_points must be >= 1")
        if self.points_per_lane < 2:
            raise ConfigError("points_per_lane must be >= 2")
        if self.merge_tolerance < 0:
            raise ConfigError(f"merge_tolerance must be >= 0, got {self.merge_tolerance}")
        for name, (lo, hi) in (("x_range", self.x_range), ("y_range", self.y_range)):
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
                raise ConfigError(f"{name} must be a finite (min, max) with max > min")
        for name in ("score_threshold", "adjacency_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")

    @property
    def bin_width_x(self) -> float:
        return (self.x_range[1] - self.x_range[0]) / self.x_bins

    @property
    def bin_width_y(self) -> float:
        return (self.y_range[1] - self.y_range[0]) / self.y_bins

    @property
    def edge_token_budget(self) -> int:
        """Length of the padded edge region: max_edges sextets plus EOS."""
        return 6 * self.max_edges + 1

    @property
    def prompt_token_budget(self) -> int:
        """Length of the prompt region: max_prompt_points pairs plus EOK."""
        return 2 * self.max_prompt_points + 1

    def replace(self, **overrides) -> "CodecConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        unknown = set(overrides) - set(values)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(overrides)
        return CodecConfig(**values)


DEFAULT_CONFIG = CodecConfig()
