"""
Receivers compared by the harness.
Each receiver knows how to turn one received window into decisions or decoder input.
"""

from ..models import ReceiverName
from .base import Detection, ReceiverRunner, ReceiverView, TrialTruth
from .bp import BpRunner
from .conventional import ConventionalRunner
from .genie import GenieRunner
from .mmse import MmseRunner

# Map ReceiverName enum to runner instances
RECEIVER_RUNNERS: dict[ReceiverName, ReceiverRunner] = {
    ReceiverName.GENIE: GenieRunner(),
    ReceiverName.BP: BpRunner(),
    ReceiverName.MMSE: MmseRunner(),
    ReceiverName.CONVENTIONAL: ConventionalRunner(),
}

__all__ = [
    "Detection",
    "ReceiverRunner",
    "ReceiverView",
    "TrialTruth",
    "BpRunner",
    "ConventionalRunner",
    "GenieRunner",
    "MmseRunner",
    "RECEIVER_RUNNERS",
]
