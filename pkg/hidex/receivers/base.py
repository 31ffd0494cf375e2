"""
Base receiver runner interface.
Defines the contract every receiver in a sweep must implement.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..bp import ChannelModel, SymbolPrior
from ..channel import ChannelTrace, NoiseParams, ReceivedFrame
from ..framing import CollisionScene
from ..ldpc import LdpcCode, Schedule, decode, message_bits


@dataclass(frozen=True, eq=False)
class ReceiverView:
    """Everything a practical receiver may use in one trial."""
    y: ReceivedFrame
    priors: SymbolPrior
    model: ChannelModel
    positions: list[np.ndarray | None]  # per user: absolute time of each data symbol, -1 outside the window
    k_max: int = 8
    mmse_window: int = 2


@dataclass(frozen=True, eq=False)
class TrialTruth:
    """Simulation ground truth; only genie receivers look at it."""
    scene: CollisionScene
    h: ChannelTrace
    h_prime: ChannelTrace
    noise: NoiseParams
    positions: list[np.ndarray]  # true absolute data positions per user


class Detection(NamedTuple):
    """Uncoded receiver output."""
    decisions: np.ndarray  # (l, 2) hard symbols; NaN for a user the receiver does not recover
    channel: np.ndarray | None  # (l, n_r) desired-channel estimate, None when not estimated


class ReceiverRunner(ABC):
    """
    Abstract base class for receivers.
    Each receiver knows how to detect uncoded symbols and how to produce
    decoder input for coded frames.
    """

    @property
    @abstractmethod
    def name(self) -> str:
        """Label used in result rows."""
        pass

    @property
    def users(self) -> tuple[int, ...]:
        """Users whose packets this receiver recovers."""
        return (0,)

    @abstractmethod
    def detect(self, view: ReceiverView, truth: TrialTruth) -> Detection:
        """Hard symbol decisions over the window."""
        pass

    @abstractmethod
    def llrs(self, view: ReceiverView, truth: TrialTruth, user: int) -> np.ndarray | None:
        """Bit LLRs log P(0)/P(1) for each code bit of `user`, or None when unavailable."""
        pass

    def decode(self, view: ReceiverView, truth: TrialTruth, code: LdpcCode,
               schedule: Schedule) -> list[np.ndarray | None]:
        """
        Decoded message bits per user.

        Separate detection and decoding: the decoder gets the full
        i_det * i_dec iteration budget in a single run.
        """
        out: list[np.ndarray | None] = [None, None]
        for user in self.users:
            llrs = self.llrs(view, truth, user)
            if llrs is None:
                continue
            result = decode(code, llrs, schedule.i_det * schedule.i_dec)
            out[user] = message_bits(code, result.bits)
        return out


def gather(values: np.ndarray, positions: np.ndarray | None) -> np.ndarray | None:
    """Per-time values at code-bit positions; zero where the position fell outside the window."""
    if positions is None:
        return None
    out = np.zeros(positions.shape[0])
    inside = positions >= 0
    out[inside] = values[positions[inside]]
    return out
