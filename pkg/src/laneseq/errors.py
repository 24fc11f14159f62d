"""Exception hierarchy for the laneseq core.

Every failure mode has its own class so callers (and foreign-language
wrappers) can dispatch on the class name. ``LaneSeqError.name`` returns
that name for serialization into diagnostics.
"""

from __future__ import annotations


class LaneSeqError(Exception):
    """Base class for all laneseq errors."""

    @property
    def name(self) -> str:
        return type(self).__name__


class ConfigError(LaneSeqError):
    """Invalid codec configuration (bad bin counts, ranges, thresholds...)."""


# -- graph model ---------------------------------------------------------

class NonFiniteCoordinate(LaneSeqError):
    """A coordinate is NaN or infinite."""


class CycleDetected(LaneSeqError):
    """The merged key-point graph contains a directed cycle."""


class InconsistentAdjacency(LaneSeqError):
    """Adjacency marks two lanes as connected but their endpoints are too far apart."""

    def __init__(self, i: int, j: int, gap: float, tol: float):
        super().__init__(
            f"adjacency marks lane {i} -> lane {j} connected but endpoint gap "
            f"{gap:.3f} m exceeds tolerance {tol:.3f} m"
        )
        self.pair = (i, j)
        self.gap = gap


class InvalidDag(LaneSeqError):
    """A KeyPointDag violates its structural invariants (see attached violations)."""

    def __init__(self, violations):
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = list(violations)


# -- quantizer -----------------------------------------------------------

class BinOutOfRange(LaneSeqError):
    """A quantized bin index lies outside the configured grid."""


# -- sequence codec ------------------------------------------------------

class TooManyEdges(LaneSeqError):
    """Sequence would exceed the edge budget (one sextet per root and per edge)."""


class TooManyKeypoints(LaneSeqError):
    """More key points than the numeric token range can index."""


class CloneAmbiguity(LaneSeqError):
    """Two key points share a quantized bin, so coordinate lookup is ambiguous."""


class BudgetExceeded(LaneSeqError):
    """Training-pair assembly cannot fit the configured token budgets."""


class TokenStreamError(LaneSeqError):
    """Base for strict-decode failures; carries the offending token index."""

    def __init__(self, message: str, token_index: int):
        super().__init__(f"{message} (token {token_index})")
        self.token_index = token_index


class TruncatedSextet(TokenStreamError):
    """Stream ended in the middle of a sextet."""


class MissingEos(TokenStreamError):
    """Stream ended at a sextet boundary without an EOS token."""


class BadSlotToken(TokenStreamError):
    """Token is not valid for the sextet slot it occupies."""


class ConOutOfRange(TokenStreamError):
    """Parent index outside the range valid for the sextet's class."""


class CloneTargetMissing(TokenStreamError):
    """Clone coordinates match no previously emitted key point."""


class LinealWithoutPrevious(TokenStreamError):
    """Lineal sextet with no previously realized key point."""


# -- decode engine -------------------------------------------------------

class AllMaskedZero(LaneSeqError):
    """Every grammar-legal token has zero probability; cannot renormalize."""


class LengthMismatch(LaneSeqError):
    """Probability table row count does not match the target length."""


class NonDistributionRow(LaneSeqError):
    """A probability row is negative, non-finite, or sums to zero."""


# -- synthetic generator -------------------------------------------------

class SpecInfeasible(LaneSeqError):
    """The generator cannot place the requested structure inside the grid."""
