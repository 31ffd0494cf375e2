"""
Genie-aided receiver: both true channel traces and the true geometry are revealed.
"""

import numpy as np

from ..baselines import genie_llrs, genie_ml_detect
from .base import Detection, ReceiverRunner, ReceiverView, TrialTruth


class GenieRunner(ReceiverRunner):
    """Symbol-wise joint ML with full CSI; lower-bounds every practical receiver."""

    @property
    def name(self) -> str:
        return "genie"

    @property
    def users(self) -> tuple[int, ...]:
        return (0, 1)

    def detect(self, view: ReceiverView, truth: TrialTruth) -> Detection:
        decisions = genie_ml_detect(view.y, truth.h, truth.h_prime, truth.scene)
        return Detection(decisions=decisions, channel=None)

    def llrs(self, view: ReceiverView, truth: TrialTruth, user: int) -> np.ndarray | None:
        llrs = genie_llrs(view.y, truth.h, truth.h_prime, truth.scene, truth.noise, user)
        return llrs[truth.positions[user]]
