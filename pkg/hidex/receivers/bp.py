"""
Message-passing receiver: joint detection of both packets with channel tracking.
"""

import numpy as np

from ..bp import bp_detect, extrinsic_llrs
from ..ldpc import LdpcCode, Schedule, joint_receive
from .base import Detection, ReceiverRunner, ReceiverView, TrialTruth


class BpRunner(ReceiverRunner):
    """Gaussian-mixture forward/reverse detector, optionally iterated with the decoder."""

    @property
    def name(self) -> str:
        return "bp"

    @property
    def users(self) -> tuple[int, ...]:
        return (0, 1)

    def detect(self, view: ReceiverView, truth: TrialTruth) -> Detection:
        posterior = bp_detect(view.y, view.priors, view.model, view.k_max)
        return Detection(decisions=posterior.decisions, channel=posterior.channel(0))

    def llrs(self, view: ReceiverView, truth: TrialTruth, user: int) -> np.ndarray | None:
        positions = view.positions[user]
        if positions is None:
            return None
        posterior = bp_detect(view.y, view.priors, view.model, view.k_max)
        out = np.zeros(positions.shape[0])
        inside = positions >= 0
        out[inside] = extrinsic_llrs(posterior, view.priors, user, positions[inside])
        return out

    def decode(self, view: ReceiverView, truth: TrialTruth, code: LdpcCode,
               schedule: Schedule) -> list[np.ndarray | None]:
        """Iterative exchange: i_det detector sweeps, i_dec decoder iterations each."""
        result = joint_receive(view.y, view.priors, view.model, code, schedule,
                               view.positions, view.k_max)
        return [result.message(code, user) for user in range(2)]
