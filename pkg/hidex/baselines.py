"""
Reference receivers: nearest-pilot conventional, pilot-aided MMSE, and genie-aided ML.

The linear receivers estimate only the desired channel from its known
symbols and treat the interferer as noise; the genie sees both true
channel traces and detects both users symbol by symbol.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.linalg import solve
from scipy.special import logsumexp

from .bp import MINUS, PLUS, SILENT, SymbolPrior
from .channel import ChannelTrace, FadingParams, NoiseParams, ReceivedFrame
from .errors import ConfigurationError, ParameterError, ShapeError
from .framing import CollisionScene

# Tie-break order for the genie: prefer x = +1, then x' = +1.
GENIE_HYPOTHESES = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])


@dataclass(frozen=True)
class MmseConfig:
    """Wiener filter span and the interference power it assumes inside the overlap."""
    window: int = 2  # pilot observations on each side
    interference_var: float = 0.0

    def __post_init__(self):
        if self.window < 1:
            raise ParameterError(f"window must be at least 1, got {self.window}")
        if self.interference_var < 0:
            raise ParameterError("interference_var must be nonnegative")


@dataclass(frozen=True, eq=False)
class PilotMap:
    """What a single-user receiver knows: its own known symbols and where interference is expected."""
    mask: np.ndarray  # (l,) True where the desired symbol is known
    symbols: np.ndarray  # (l,) known symbol values, 0 elsewhere
    interference: np.ndarray  # (l,) True where the interferer is assumed on the air

    @classmethod
    def from_priors(cls, priors: SymbolPrior, user: int = 0) -> PilotMap:
        own = priors.pmf[:, user]
        other = priors.pmf[:, 1 - user]
        plus = own[:, PLUS] == 1.0
        minus = own[:, MINUS] == 1.0
        return cls(
            mask=plus | minus,
            symbols=np.where(plus, 1.0, np.where(minus, -1.0, 0.0)),
            interference=other[:, SILENT] < 1.0,
        )

    @property
    def positions(self) -> np.ndarray:
        return np.flatnonzero(self.mask)


class LinearEstimate(NamedTuple):
    """Output of a single-user linear receiver."""
    decisions: np.ndarray  # (l,) hard symbols
    channel: np.ndarray  # (l, n_r) desired-channel estimates
    error_var: np.ndarray  # (l,) per-antenna estimation error variance the receiver assumes
    noise_var: np.ndarray  # (l,) noise-plus-interference variance the receiver assumes


def _pilot_observations(y: ReceivedFrame, pilots: PilotMap) -> tuple[np.ndarray, np.ndarray]:
    positions = pilots.positions
    if positions.size == 0:
        raise ConfigurationError("frame carries no known symbols for channel estimation")
    if pilots.mask.shape[0] != len(y):
        raise ShapeError("pilot map and received frame differ in length")
    # z_p = x_p^* y_p = h_p + (noise + interference) x_p^*
    return positions, y.y[positions] * pilots.symbols[positions, None]


def _coherent_decisions(y: np.ndarray, channel: np.ndarray) -> np.ndarray:
    metric = np.real(np.sum(np.conj(channel) * y, axis=1))
    return np.where(metric >= 0, 1.0, -1.0)


@lru_cache(maxsize=4096)
def _cached_weights(offsets: tuple[int, ...], noise: tuple[float, ...], alpha: float, sigma_h2: float):
    lags = np.abs(np.subtract.outer(offsets, offsets))
    r_zz = sigma_h2 * np.power(alpha, lags) + np.diag(noise)
    r_hz = sigma_h2 * np.power(alpha, np.abs(offsets))
    weights = solve(r_zz, r_hz, assume_a="pos")
    return weights, float(sigma_h2 - r_hz @ weights)


def wiener_weights(target: int, pilot_positions: np.ndarray, noise_var: np.ndarray,
                   fading: FadingParams) -> tuple[np.ndarray, float]:
    """
    Wiener weights estimating h_target from pilot observations z_p = h_p + e_p.

    Solves (R + diag(noise_var)) w = r with R[p, q] = sigma_h2 alpha^|p-q| and
    r[p] = sigma_h2 alpha^|target-p|. Returns the weights and the residual
    error variance sigma_h2 - r^T w.
    """
    offsets = tuple(int(p) - int(target) for p in pilot_positions)
    noise = tuple(float(v) for v in noise_var)
    weights, error = _cached_weights(offsets, noise, float(fading.alpha), float(fading.sigma_h2))
    return weights.copy(), error


def _window_pilots(positions: np.ndarray, i: int, window: int) -> np.ndarray:
    left = np.searchsorted(positions, i, side="left")
    right = np.searchsorted(positions, i, side="right")
    return positions[max(0, left - window) : min(positions.size, right + window)]


def mmse_receiver(y: ReceivedFrame, pilots: PilotMap, cfg: MmseConfig, fading: FadingParams,
                  noise: NoiseParams) -> LinearEstimate:
    """
    Pilot-aided Wiener channel estimate and coherent detection.

    Each time uses `window` known symbols on each side (plus its own, when
    known). The interferer enters only as extra white noise of variance
    cfg.interference_var on observations inside the assumed overlap.
    """
    positions, observations = _pilot_observations(y, pilots)
    noise_var = noise.sigma_n2 + cfg.interference_var * pilots.interference
    length = len(y)
    channel = np.zeros((length, y.n_r), dtype=complex)
    error_var = np.zeros(length)
    index_of = {int(p): k for k, p in enumerate(positions)}
    for i in range(length):
        used = _window_pilots(positions, i, cfg.window)
        weights, error = wiener_weights(i, used, noise_var[used], fading)
        rows = [index_of[int(p)] for p in used]
        channel[i] = weights @ observations[rows]
        error_var[i] = error
    return LinearEstimate(
        decisions=_coherent_decisions(y.y, channel),
        channel=channel,
        error_var=error_var,
        noise_var=noise_var,
    )


def conventional_receiver(y: ReceivedFrame, pilots: PilotMap, noise: NoiseParams) -> LinearEstimate:
    """
    Nearest-known-symbol channel estimate and coherent detection.

    Interference is ignored entirely; ties between two equally near pilots
    go to the earlier one.
    """
    positions, observations = _pilot_observations(y, pilots)
    times = np.arange(len(y))
    right = np.clip(np.searchsorted(positions, times, side="left"), 0, positions.size - 1)
    left = np.clip(right - 1, 0, positions.size - 1)
    take_left = np.abs(times - positions[left]) <= np.abs(positions[right] - times)
    nearest = np.where(take_left, left, right)
    channel = observations[nearest]
    return LinearEstimate(
        decisions=_coherent_decisions(y.y, channel),
        channel=channel,
        error_var=np.zeros(len(y)),
        noise_var=np.full(len(y), noise.sigma_n2),
    )


def baseline_llrs(y: ReceivedFrame, estimate: LinearEstimate) -> np.ndarray:
    """
    Per-time BPSK LLRs log P(+1)/P(-1) treating the channel estimate as exact
    up to its error variance and the interference as Gaussian.
    """
    effective = estimate.noise_var + estimate.error_var
    metric = np.real(np.sum(np.conj(estimate.channel) * y.y, axis=1))
    return 4.0 * metric / effective


def _genie_distances(y: ReceivedFrame, h: ChannelTrace, h_prime: ChannelTrace,
                     scene: CollisionScene) -> tuple[np.ndarray, np.ndarray]:
    if not len(y) == len(h) == len(h_prime) == scene.window_len:
        raise ShapeError("received frame, channel traces and scene must share the window length")
    active_a, active_b = scene.active()
    cand_a = GENIE_HYPOTHESES[None, :, 0] * active_a[:, None]  # (l, 4)
    cand_b = GENIE_HYPOTHESES[None, :, 1] * active_b[:, None]
    predicted = (
        h.samples[:, None, :] * cand_a[:, :, None]
        + h_prime.samples[:, None, :] * cand_b[:, :, None]
    )
    distances = np.sum(np.abs(y.y[:, None, :] - predicted) ** 2, axis=2)
    return distances, np.stack([cand_a, cand_b], axis=2)


def genie_ml_detect(y: ReceivedFrame, h: ChannelTrace, h_prime: ChannelTrace,
                    scene: CollisionScene) -> np.ndarray:
    """
    Symbol-wise joint ML detection with both true channels revealed.

    Returns hard symbols of shape (l, 2), zero where a user is silent.
    """
    distances, candidates = _genie_distances(y, h, h_prime, scene)
    best = np.argmin(distances, axis=1)  # first minimum keeps the +1 preference
    return candidates[np.arange(len(y)), best]


def genie_llrs(y: ReceivedFrame, h: ChannelTrace, h_prime: ChannelTrace, scene: CollisionScene,
               noise: NoiseParams, user: int = 0) -> np.ndarray:
    """Exact per-time LLRs of one user with full CSI, marginalizing the other user's symbol."""
    distances, candidates = _genie_distances(y, h, h_prime, scene)
    log_lik = -distances / noise.sigma_n2
    plus = np.where(candidates[:, :, user] > 0, log_lik, -np.inf)
    minus = np.where(candidates[:, :, user] < 0, log_lik, -np.inf)
    return logsumexp(plus, axis=1) - logsumexp(minus, axis=1)
