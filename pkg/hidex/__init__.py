"""
hidex - recovering two colliding packets with message-passing detection.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("hidex")
except PackageNotFoundError:
    __version__ = "0.0.0"

from .errors import (
    ConfigurationError,
    ConstructionError,
    DegenerateMessageError,
    ErrorCode,
    HidexError,
    OutputError,
    ParameterError,
    ShapeError,
    SweepCancelled,
)
from .models import ExperimentConfig, Metric, ReceiverName, ResultRow, Scenario
from .channel import FadingParams, NoiseParams, compose_received, gen_fading
from .framing import PacketSpec, build_frame, gen_preamble, make_collision
from .detect import cross_correlate, detect_second_start
from .bp import bp_detect, extrinsic_llrs, prune_mixture
from .baselines import conventional_receiver, genie_ml_detect, mmse_receiver
from .ldpc import build_code, decode, encode, joint_receive
from .harness import find_detection_knee, find_sinr_threshold, run_sweep
from .output import read_rows, render_outputs

__all__ = [
    "__version__",
    # Errors
    "ConfigurationError",
    "ConstructionError",
    "DegenerateMessageError",
    "ErrorCode",
    "HidexError",
    "OutputError",
    "ParameterError",
    "ShapeError",
    "SweepCancelled",
    # Configuration and results
    "ExperimentConfig",
    "Metric",
    "ReceiverName",
    "ResultRow",
    "Scenario",
    # Physical layer
    "FadingParams",
    "NoiseParams",
    "compose_received",
    "gen_fading",
    "PacketSpec",
    "build_frame",
    "gen_preamble",
    "make_collision",
    "cross_correlate",
    "detect_second_start",
    # Receivers and coding
    "bp_detect",
    "extrinsic_llrs",
    "prune_mixture",
    "conventional_receiver",
    "genie_ml_detect",
    "mmse_receiver",
    "build_code",
    "decode",
    "encode",
    "joint_receive",
    # Experiments
    "find_detection_knee",
    "find_sinr_threshold",
    "run_sweep",
    "read_rows",
    "render_outputs",
]
