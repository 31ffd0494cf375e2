"""
Pilot-aided MMSE receiver that treats the interferer as white noise.
"""

import numpy as np

from ..baselines import LinearEstimate, MmseConfig, PilotMap, baseline_llrs, mmse_receiver
from .base import Detection, ReceiverRunner, ReceiverView, TrialTruth, gather


class MmseRunner(ReceiverRunner):
    """Wiener channel estimate from the desired user's known symbols."""

    @property
    def name(self) -> str:
        return "mmse"

    def estimate(self, view: ReceiverView) -> LinearEstimate:
        cfg = MmseConfig(window=view.mmse_window, interference_var=view.model.fading_b.sigma_h2)
        return mmse_receiver(view.y, PilotMap.from_priors(view.priors), cfg,
                             view.model.fading_a, view.model.noise)

    def detect(self, view: ReceiverView, truth: TrialTruth) -> Detection:
        estimate = self.estimate(view)
        decisions = np.full((len(view.y), 2), np.nan)
        decisions[:, 0] = estimate.decisions
        return Detection(decisions=decisions, channel=estimate.channel)

    def llrs(self, view: ReceiverView, truth: TrialTruth, user: int) -> np.ndarray | None:
        if user != 0:
            return None
        return gather(baseline_llrs(view.y, self.estimate(view)), view.positions[0])
