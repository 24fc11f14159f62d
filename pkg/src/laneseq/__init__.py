"""Deterministic lane-topology sequence codec.

Converts lane graphs (centerlines + adjacency) to and from a compact
token language: merged key-point DAGs, six-integer edge sextets, key-point
prompts, grammar-constrained decoding, likelihood scoring, and lane-graph
metrics. Pure functions throughout; every random choice takes an explicit
seed or generator.
"""

from . import errors
from .bezier import EdgeCurve, elevate_to_cubic, fit_control_point, sample_curve
from .codec import (
    EdgeSequence,
    EdgeSextet,
    RoundTripReport,
    SequenceViolation,
    assemble_training_pair,
    compare_roundtrip,
    decode,
    encode,
    validate_sequence,
)
from .config import DEFAULT_CONFIG, CodecConfig
from .decoding import (
    DecoderState,
    StepMask,
    advance,
    next_mask,
    run,
    sequence_nll,
    step,
)
from .graph import (
    Centerline,
    DagEdge,
    KeyPointDag,
    LaneGraph,
    Point3,
    Violation,
    dag_to_lanegraph,
    lanegraph_to_dag,
    validate_dag,
)
from .metrics import EvalReport, evaluate, frechet
from .prompts import PromptSet, extract_keypoints, shuffle_prompt
from .quantize import QuantPoint, dequantize, quantize
from .synth import GenSpec, generate
from .vocab import ANCESTOR, CLONE, LINEAL, OFFSHOOT, Vocabulary

__version__ = "0.1.0"

__all__ = [
    "ANCESTOR",
    "CLONE",
    "Centerline",
    "CodecConfig",
    "DEFAULT_CONFIG",
    "DagEdge",
    "DecoderState",
    "EdgeCurve",
    "EdgeSequence",
    "EdgeSextet",
    "EvalReport",
    "GenSpec",
    "KeyPointDag",
    "LINEAL",
    "LaneGraph",
    "OFFSHOOT",
    "Point3",
    "PromptSet",
    "QuantPoint",
    "RoundTripReport",
    "SequenceViolation",
    "StepMask",
    "Violation",
    "Vocabulary",
    "advance",
    "assemble_training_pair",
    "compare_roundtrip",
    "dag_to_lanegraph",
    "decode",
    "dequantize",
    "elevate_to_cubic",
    "encode",
    "errors",
    "evaluate",
    "extract_keypoints",
    "fit_control_point",
    "frechet",
    "generate",
    "lanegraph_to_dag",
    "next_mask",
    "quantize",
    "run",
    "sample_curve",
    "sequence_nll",
    "shuffle_prompt",
    "step",
    "validate_dag",
    "validate_sequence",
    "__version__",
]
