"""
Time-correlated Rayleigh fading and the two-user received signal.

Each user's channel is a first-order Gauss-Markov process
    h_i = alpha * h_{i-1} + sqrt(1 - alpha^2) * w_i
started from its stationary distribution, and the receiver observes
    y_i = h_i x_i + h'_i x'_i + n_i
at absolute time i over the union window of both packets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
from scipy.signal import lfilter

from .errors import ParameterError, ShapeError

if TYPE_CHECKING:
    from .framing import CollisionScene

Seed = int | np.random.SeedSequence | None


@dataclass(frozen=True)
class FadingParams:
    """AR(1) fading process for one user."""
    alpha: float
    sigma_h2: float = 1.0
    n_r: int = 1

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.sigma_h2 > 0.0:
            raise ParameterError(f"sigma_h2 must be positive, got {self.sigma_h2}")
        if self.n_r < 1:
            raise ParameterError(f"n_r must be at least 1, got {self.n_r}")

    @property
    def innovation_scale(self) -> float:
        return float(np.sqrt(1.0 - self.alpha ** 2))


@dataclass(frozen=True)
class NoiseParams:
    """Receiver noise power per receive dimension."""
    sigma_n2: float

    def __post_init__(self):
        if not self.sigma_n2 > 0.0:
            raise ParameterError(f"sigma_n2 must be positive, got {self.sigma_n2}")

    @classmethod
    def from_snr_db(cls, snr_db: float, sigma_h2: float = 1.0) -> NoiseParams:
        """Noise level giving SNR = sigma_h2 / sigma_n2."""
        return cls(sigma_n2=sigma_h2 / 10.0 ** (snr_db / 10.0))


@dataclass(frozen=True, eq=False)
class ChannelTrace:
    """Channel coefficient vectors, shape (l, n_r)."""
    samples: np.ndarray

    def __post_init__(self):
        if self.samples.ndim != 2:
            raise ShapeError(f"channel trace must be 2-D (l, n_r), got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ParameterError("channel trace contains non-finite samples")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def n_r(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True, eq=False)
class ReceivedFrame:
    """Received samples over the union window, shape (l, n_r)."""
    y: np.ndarray

    def __len__(self) -> int:
        return self.y.shape[0]

    @property
    def n_r(self) -> int:
        return self.y.shape[1]


class TrialStreams(NamedTuple):
    """Independent RNG seeds for one Monte Carlo trial."""
    bits_a: np.random.SeedSequence
    bits_b: np.random.SeedSequence
    fading_a: np.random.SeedSequence
    fading_b: np.random.SeedSequence
    noise: np.random.SeedSequence
    offset: np.random.SeedSequence


def trial_streams(master_seed: int, *keys: int) -> TrialStreams:
    """
    Derive the per-trial seeds from one master seed.

    The keys (typically gridpoint index and trial index) select a
    disjoint child of the master sequence, so every receiver evaluated on
    the same keys sees the same data, fading and noise.
    """
    root = np.random.SeedSequence(entropy=[int(master_seed), *(int(k) for k in keys)])
    return TrialStreams(*root.spawn(len(TrialStreams._fields)))


def cscg(rng: np.random.Generator, shape: tuple[int, ...], var: float) -> np.ndarray:
    """Circularly-symmetric complex Gaussian draws with E|z|^2 = var."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def gen_fading(params: FadingParams, l: int, seed: Seed) -> ChannelTrace:
    """
    Generate l samples of the AR(1) fading process.

    h_1 is drawn from the stationary law CN(0, sigma_h2 I) and every later
    sample follows the recursion with CSCG innovations of the same
    covariance, so the marginal covariance is sigma_h2 I at every i.
    """
    if l < 1:
        raise ParameterError(f"trace length must be at least 1, got {l}")
    rng = np.random.default_rng(seed)
    innovations = cscg(rng, (l, params.n_r), params.sigma_h2)
    innovations[1:] *= params.innovation_scale
    samples = lfilter([1.0], [1.0, -params.alpha], innovations, axis=0)
    return ChannelTrace(samples=samples)


def compose_received(
    scene: CollisionScene,
    h: ChannelTrace,
    h_prime: ChannelTrace,
    noise: NoiseParams,
    seed: Seed,
) -> ReceivedFrame:
    """
    Superimpose both packets through their channels and add receiver noise.

    Symbols of a user outside its own packet are exactly zero, so the
    interference-free parts of the window carry a single signal term.
    """
    window = scene.window_len
    if len(h) != window or len(h_prime) != window:
        raise ShapeError(
            f"channel traces must cover the union window of {window} symbols, "
            f"got {len(h)} and {len(h_prime)}"
        )
    if h.n_r != h_prime.n_r:
        raise ShapeError(f"antenna count mismatch: {h.n_r} vs {h_prime.n_r}")
    rng = np.random.default_rng(seed)
    x_a, x_b = scene.signals()
    y = h.samples * x_a[:, None] + h_prime.samples * x_b[:, None]
    y = y + cscg(rng, y.shape, noise.sigma_n2)
    return ReceivedFrame(y=y)
