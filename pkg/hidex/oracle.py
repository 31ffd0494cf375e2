"""
Brute-force symbol posteriors for short frames.

Every joint symbol sequence with positive prior mass is enumerated; for a
fixed sequence the observations are jointly Gaussian,
    Cov(y_i, y_j) = x_i x_j sa2 aa^|i-j| + x'_i x'_j sb2 ab^|i-j| + sn2 [i == j],
so the sequence likelihood is available in closed form without any
recursion. Cost grows as 4^l; intended for l <= 8.
"""

import itertools

import numpy as np
from scipy.special import logsumexp

from .bp import ALPHABET, ChannelModel, SymbolPrior
from .channel import ReceivedFrame
from .errors import ParameterError, ShapeError

MAX_SEQUENCES = 1 << 18
CHUNK = 4096


def _ar_kernel(alpha: float, sigma2: float, length: int) -> np.ndarray:
    lags = np.abs(np.subtract.outer(np.arange(length), np.arange(length)))
    return sigma2 * np.power(alpha, lags)


def enumerate_posteriors(y: ReceivedFrame, priors: SymbolPrior, model: ChannelModel) -> np.ndarray:
    """Exact per-time symbol marginals, shape (l, 2, 3)."""
    length = len(y)
    if len(priors) != length:
        raise ShapeError("priors and received frame differ in length")
    supports = [
        [(a, b) for a in np.flatnonzero(priors.pmf[i, 0] > 0) for b in np.flatnonzero(priors.pmf[i, 1] > 0)]
        for i in range(length)
    ]
    count = int(np.prod([len(s) for s in supports], dtype=float))
    if count > MAX_SEQUENCES:
        raise ParameterError(f"{count} symbol sequences exceed the enumeration limit {MAX_SEQUENCES}")

    kernel_a = _ar_kernel(model.fading_a.alpha, model.fading_a.sigma_h2, length)
    kernel_b = _ar_kernel(model.fading_b.alpha, model.fading_b.sigma_h2, length)
    noise = model.noise.sigma_n2 * np.eye(length)
    times = np.arange(length)

    sequences = list(itertools.product(*supports))
    idx_a = np.array([[pair[0] for pair in seq] for seq in sequences])
    idx_b = np.array([[pair[1] for pair in seq] for seq in sequences])
    log_prior = (
        np.log(priors.pmf[times, 0, idx_a]).sum(axis=1)
        + np.log(priors.pmf[times, 1, idx_b]).sum(axis=1)
    )

    log_weights = np.empty(len(sequences))
    for start in range(0, len(sequences), CHUNK):
        xa = ALPHABET[idx_a[start : start + CHUNK]]
        xb = ALPHABET[idx_b[start : start + CHUNK]]
        cov = (
            xa[:, :, None] * xa[:, None, :] * kernel_a
            + xb[:, :, None] * xb[:, None, :] * kernel_b
            + noise
        )
        _, logdet = np.linalg.slogdet(cov)
        # Antennas are i.i.d. given the sequence.
        solved = np.linalg.solve(cov[:, None], np.broadcast_to(y.y.T[None, :, :, None], (cov.shape[0], y.n_r, length, 1)))
        quad = np.real(np.einsum("ri,nri->n", np.conj(y.y.T), solved[..., 0]))
        loglik = -y.n_r * (length * np.log(np.pi) + logdet) - quad
        log_weights[start : start + CHUNK] = loglik

    log_weights += log_prior
    log_weights -= logsumexp(log_weights)
    weights = np.exp(log_weights)

    pmf = np.zeros((length, 2, 3))
    for i in range(length):
        np.add.at(pmf[i, 0], idx_a[:, i], weights)
        np.add.at(pmf[i, 1], idx_b[:, i], weights)
    return pmf
