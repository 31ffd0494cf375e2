"""
Conventional single-user receiver: nearest known symbol, interference ignored.
"""

import numpy as np

from ..baselines import PilotMap, baseline_llrs, conventional_receiver
from .base import Detection, ReceiverRunner, ReceiverView, TrialTruth, gather


class ConventionalRunner(ReceiverRunner):

    @property
    def name(self) -> str:
        return "conventional"

    def detect(self, view: ReceiverView, truth: TrialTruth) -> Detection:
        estimate = conventional_receiver(view.y, PilotMap.from_priors(view.priors), view.model.noise)
        decisions = np.full((len(view.y), 2), np.nan)
        decisions[:, 0] = estimate.decisions
        return Detection(decisions=decisions, channel=estimate.channel)

    def llrs(self, view: ReceiverView, truth: TrialTruth, user: int) -> np.ndarray | None:
        if user != 0:
            return None
        estimate = conventional_receiver(view.y, PilotMap.from_priors(view.priors), view.model.noise)
        return gather(baseline_llrs(view.y, estimate), view.positions[0])
