"""
Collision detection by sliding cross-correlation against the known preamble.

The statistic thresholded at each shift is the energy-normalized
correlation |Gamma(D)| / sqrt(L * sum_k |y[k+D]|^2), which is bounded by 1
(Cauchy-Schwarz) and does not depend on the unknown interferer power.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import correlate

from .channel import ReceivedFrame
from .errors import ParameterError, ShapeError


@dataclass(frozen=True, eq=False)
class CorrelationProfile:
    """Per-antenna correlations Gamma(D), shape (l - L + 1, n_r), and window energies."""
    values: np.ndarray
    energy: np.ndarray
    preamble_len: int

    def __len__(self) -> int:
        return self.values.shape[0]


def cross_correlate(y: ReceivedFrame, preamble: np.ndarray) -> CorrelationProfile:
    """Gamma(D) = sum_k s*[k] y[k+D] for every shift that keeps the preamble inside y."""
    preamble = np.asarray(preamble)
    length = preamble.shape[0]
    if len(y) < length:
        raise ShapeError(f"received length {len(y)} is shorter than the preamble ({length})")
    values = np.stack(
        [correlate(y.y[:, antenna], preamble, mode="valid", method="direct") for antenna in range(y.n_r)],
        axis=1,
    )
    power = np.sum(np.abs(y.y) ** 2, axis=1)
    energy = correlate(power, np.ones(length), mode="valid", method="direct")
    return CorrelationProfile(values=values, energy=energy, preamble_len=length)


def normalized_statistic(profile: CorrelationProfile) -> np.ndarray:
    """Noncoherently combined, energy-normalized correlation in [0, 1]."""
    magnitude = np.sqrt(np.sum(np.abs(profile.values) ** 2, axis=1))
    scale = np.sqrt(profile.preamble_len * np.maximum(profile.energy, 0.0))
    stat = np.zeros_like(magnitude)
    nonzero = scale > 0
    stat[nonzero] = magnitude[nonzero] / scale[nonzero]
    # Rounding can push an exact match a few ulps past 1.
    return np.minimum(stat, 1.0)


def detect_second_start(profile: CorrelationProfile, tau: float = 0.5) -> int | None:
    """
    Smallest shift D >= 1 whose normalized statistic reaches tau.

    D = 0 is the first packet's own preamble and never reports a collision.
    Returns None when no interior shift qualifies.
    """
    if not 0.0 < tau < 1.0:
        raise ParameterError(f"tau must lie in (0, 1), got {tau}")
    if len(profile) == 0:
        raise ShapeError("empty correlation profile")
    stat = normalized_statistic(profile)
    hits = np.flatnonzero(stat[1:] >= tau)
    if hits.size == 0:
        return None
    return int(hits[0] + 1)


def is_fault(detected: int | None, truth: int) -> bool:
    """A collision was present but its start was missed or misplaced."""
    return detected is None or detected != truth
