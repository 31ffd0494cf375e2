"""
Joint two-user detection and channel estimation by message passing.

The factor graph of the collision model is a chain over the joint channel
state s_i = (h_i, h'_i). Messages along the chain are Gaussian mixtures:
every symbol hypothesis (x_i, x'_i) splits each component through a
conditional Kalman update, and the mixture is cut back to the k_max
heaviest components after each step.

Schedule: one forward recursion from the stationary prior, one recursion
over the time-reversed observations (the stationary AR(1) chain is
reversible with the same coefficients), and a local combination
    p(x_i, x'_i | y) ~ P(x_i, x'_i) * integral fwd_i(s) N(y_i; H s, R) rev_i(s) / pi(s) ds
where fwd_i and rev_i are the one-sided predictive densities and pi is the
stationary law. Without pruning this is exact on the chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np
from scipy.special import expit, logsumexp

from .channel import FadingParams, NoiseParams, ReceivedFrame
from .errors import DegenerateMessageError, ParameterError, ShapeError
from .framing import PacketSpec

# Column order of every symbol pmf.
ALPHABET = np.array([-1.0, 1.0, 0.0])
MINUS, PLUS, SILENT = 0, 1, 2

PROB_CLAMP = 1e-12
LLR_LIMIT = 30.0
PMF_ATOL = 1e-9


# === Mixtures ===

@dataclass(frozen=True, eq=False)
class MixtureComponent:
    """One weighted complex Gaussian over the stacked state (h_i, h'_i)."""
    weight: float
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Weighted set of complex Gaussians stored as stacked arrays."""
    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, d)
    covs: np.ndarray  # (K, d, d)

    def __post_init__(self):
        k = self.weights.shape[0]
        if self.means.shape[0] != k or self.covs.shape[0] != k:
            raise ShapeError("mixture arrays disagree on the number of components")

    def __len__(self) -> int:
        return self.weights.shape[0]

    @property
    def components(self) -> list[MixtureComponent]:
        return [
            MixtureComponent(weight=float(w), mean=m, cov=c)
            for w, m, c in zip(self.weights, self.means, self.covs)
        ]

    @classmethod
    def from_components(cls, components: list[MixtureComponent]) -> GaussianMixture:
        return cls(
            weights=np.array([c.weight for c in components], dtype=float),
            means=np.stack([np.asarray(c.mean, dtype=complex) for c in components]),
            covs=np.stack([np.asarray(c.cov, dtype=complex) for c in components]),
        )

    def mean(self) -> np.ndarray:
        """Weight-averaged component mean."""
        total = self.weights.sum()
        return np.einsum("k,kd->d", self.weights, self.means) / total


def _top_indices(weights: np.ndarray, k_max: int | None) -> np.ndarray:
    """Indices of the k_max largest weights in original order; ties keep the lower index."""
    if k_max is None or weights.shape[0] <= k_max:
        return np.arange(weights.shape[0])
    order = np.argsort(-weights, kind="stable")[:k_max]
    return np.sort(order)


def prune_mixture(mix: GaussianMixture, k_max: int | None) -> GaussianMixture:
    """Keep the k_max heaviest components and renormalize their weights to one."""
    _check_budget(k_max)
    total = float(np.sum(mix.weights))
    if not total > 0.0 or not np.isfinite(total):
        raise DegenerateMessageError("mixture has no positive weight", stage="prune")
    keep = _top_indices(mix.weights, k_max)
    weights = mix.weights[keep]
    return GaussianMixture(
        weights=weights / weights.sum(),
        means=mix.means[keep],
        covs=mix.covs[keep],
    )


def _check_budget(k_max: int | None):
    if k_max is not None and k_max < 1:
        raise ParameterError(f"k_max must be at least 1, got {k_max}")


# === Priors ===

@dataclass(frozen=True, eq=False)
class UserLayout:
    """Where a user's packet sits in the window and which of its symbols are known."""
    start: int
    known: np.ndarray  # per packet position: known symbol value, NaN when unknown

    @property
    def length(self) -> int:
        return self.known.shape[0]

    @classmethod
    def from_spec(
        cls,
        spec: PacketSpec,
        preamble: np.ndarray,
        start: int = 0,
        length: int | None = None,
        use_pilots: bool = True,
        header_symbols: np.ndarray | None = None,
    ) -> UserLayout:
        """
        Receiver-side layout: preamble (and optionally pilots) known, everything else unknown.

        `length` overrides the nominal frame length, e.g. after decoding a
        header; positions beyond the nominal layout are treated as unknown.
        `header_symbols`, when given, marks the header as known too.
        """
        length = spec.total_len if length is None else int(length)
        known = np.full(max(length, spec.total_len), np.nan)
        known[: spec.preamble_len] = preamble
        if use_pilots:
            pilots = np.flatnonzero(spec.pilot_pattern()) + spec.prefix_len
            known[pilots] = 1.0
        if header_symbols is not None:
            known[spec.preamble_len : spec.prefix_len] = header_symbols
        return cls(start=int(start), known=known[:length])


@dataclass(frozen=True, eq=False)
class SymbolPrior:
    """Per-time, per-user pmf over (-1, +1, 0); shape (l, 2, 3)."""
    pmf: np.ndarray

    def __post_init__(self):
        if self.pmf.ndim != 3 or self.pmf.shape[1:] != (2, 3):
            raise ShapeError(f"symbol prior must have shape (l, 2, 3), got {self.pmf.shape}")
        if np.any(self.pmf < 0) or not np.allclose(self.pmf.sum(axis=2), 1.0, atol=PMF_ATOL):
            raise ParameterError("every symbol prior must be a probability mass function")

    def __len__(self) -> int:
        return self.pmf.shape[0]

    @classmethod
    def from_layout(cls, window_len: int, layout_a: UserLayout | None, layout_b: UserLayout | None) -> SymbolPrior:
        """Silent point masses outside each packet, point masses on known symbols, uniform elsewhere."""
        pmf = np.zeros((window_len, 2, 3))
        pmf[:, :, SILENT] = 1.0
        for user, layout in enumerate((layout_a, layout_b)):
            if layout is None:
                continue
            stop = min(window_len, layout.start + layout.length)
            if stop <= layout.start:
                continue
            known = layout.known[: stop - layout.start]
            block = np.zeros((stop - layout.start, 3))
            unknown = np.isnan(known)
            block[unknown, MINUS] = 0.5
            block[unknown, PLUS] = 0.5
            block[~unknown & (known > 0), PLUS] = 1.0
            block[~unknown & (known < 0), MINUS] = 1.0
            pmf[layout.start : stop, user] = block
        return cls(pmf=pmf)

    def data_positions(self, user: int) -> np.ndarray:
        """Times where the user's symbol is genuinely uncertain."""
        pmf = self.pmf[:, user]
        return np.flatnonzero((pmf[:, PLUS] > 0) & (pmf[:, MINUS] > 0))

    def with_data_llrs(self, user: int, positions: np.ndarray, llrs: np.ndarray) -> SymbolPrior:
        """Replace the user's prior at `positions` by the BPSK pmf of the given LLRs."""
        pmf = self.pmf.copy()
        pmf[positions, user] = llrs_to_pmf(llrs)
        return SymbolPrior(pmf=pmf)


def llrs_to_pmf(llrs: np.ndarray) -> np.ndarray:
    """LLR = log P(+1)/P(-1) to rows of (P(-1), P(+1), 0)."""
    llrs = np.clip(np.asarray(llrs, dtype=float), -LLR_LIMIT, LLR_LIMIT)
    out = np.zeros((llrs.shape[0], 3))
    out[:, PLUS] = expit(llrs)
    out[:, MINUS] = expit(-llrs)
    return out


# === Detector ===

@dataclass(frozen=True)
class ChannelModel:
    """Statistical model the detector assumes: both fading processes and the noise."""
    fading_a: FadingParams
    fading_b: FadingParams
    noise: NoiseParams

    def __post_init__(self):
        if self.fading_a.n_r != self.fading_b.n_r:
            raise ParameterError("both users must share the antenna count")

    @property
    def n_r(self) -> int:
        return self.fading_a.n_r

    @property
    def dim(self) -> int:
        return 2 * self.n_r

    @property
    def transition(self) -> np.ndarray:
        """Diagonal of the block-diagonal AR(1) transition."""
        return np.repeat([self.fading_a.alpha, self.fading_b.alpha], self.n_r)

    @property
    def stationary(self) -> np.ndarray:
        """Diagonal of the stationary state covariance."""
        return np.repeat([self.fading_a.sigma_h2, self.fading_b.sigma_h2], self.n_r)

    @property
    def innovation(self) -> np.ndarray:
        """Diagonal of the per-step innovation covariance."""
        return (1.0 - self.transition ** 2) * self.stationary


@dataclass(frozen=True, eq=False)
class DetectorPosterior:
    """Symbol marginals and smoothed channel estimates."""
    symbol_pmf: np.ndarray  # (l, 2, 3)
    channel_mean: np.ndarray  # (l, 2 n_r)
    channel_cov: np.ndarray  # (l, 2 n_r, 2 n_r)
    n_r: int
    extrinsic: np.ndarray  # (l, 2) detector extrinsic LLRs, zero where the prior is not binary-uncertain

    @property
    def decisions(self) -> np.ndarray:
        """Hard symbols per user, 0 where the user is silent; +1 wins exact ties."""
        pmf = self.symbol_pmf
        hard = np.where(pmf[:, :, PLUS] >= pmf[:, :, MINUS], 1.0, -1.0)
        silent = pmf[:, :, SILENT] >= 1.0 - PMF_ATOL
        hard[silent] = 0.0
        return hard

    def channel(self, user: int) -> np.ndarray:
        """Posterior mean of one user's channel, shape (l, n_r)."""
        return self.channel_mean[:, user * self.n_r : (user + 1) * self.n_r]

    def llrs(self, user: int) -> np.ndarray:
        """Posterior LLRs log P(+1)/P(-1), probabilities clamped to 1e-12."""
        return _clamped_llr(self.symbol_pmf[:, user])

    @property
    def channel_error(self) -> np.ndarray:
        """Expected squared estimation error per time and user (trace of each covariance block), (l, 2)."""
        diag = np.real(np.diagonal(self.channel_cov, axis1=1, axis2=2))
        return diag.reshape(diag.shape[0], 2, self.n_r).sum(axis=2)


class _Hypotheses(NamedTuple):
    values: np.ndarray  # (H, 2) symbol pairs
    log_prior: np.ndarray  # (H,)


class _Message(NamedTuple):
    log_weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def as_mixture(self) -> GaussianMixture:
        return GaussianMixture(weights=np.exp(self.log_weights), means=self.means, covs=self.covs)


def _hermitian(matrices: np.ndarray) -> np.ndarray:
    return 0.5 * (matrices + np.conj(np.swapaxes(matrices, -1, -2)))


def _hypotheses(priors: SymbolPrior) -> list[_Hypotheses]:
    """Joint (x, x') hypotheses with positive prior mass at each time."""
    out = []
    with np.errstate(divide="ignore"):
        log_pmf = np.log(priors.pmf)
    for i in range(len(priors)):
        support_a = np.flatnonzero(priors.pmf[i, 0] > 0)
        support_b = np.flatnonzero(priors.pmf[i, 1] > 0)
        # Order (+1, -1, 0) so ties later resolve toward +1 first.
        support_a = support_a[np.argsort(-ALPHABET[support_a], kind="stable")]
        support_b = support_b[np.argsort(-ALPHABET[support_b], kind="stable")]
        ia, ib = np.meshgrid(support_a, support_b, indexing="ij")
        ia, ib = ia.ravel(), ib.ravel()
        out.append(_Hypotheses(
            values=np.stack([ALPHABET[ia], ALPHABET[ib]], axis=1),
            log_prior=log_pmf[i, 0, ia] + log_pmf[i, 1, ib],
        ))
    return out


def _observation_matrices(values: np.ndarray, n_r: int) -> np.ndarray:
    """H = [x I, x' I] for every hypothesis, shape (H, n_r, 2 n_r)."""
    eye = np.eye(n_r)
    return np.concatenate([values[:, 0, None, None] * eye, values[:, 1, None, None] * eye], axis=2)


def _kalman_update(message: _Message, y: np.ndarray, obs: np.ndarray, sigma_n2: float):
    """
    Condition every component on y under every hypothesis.

    Returns per-(hypothesis, component) log-likelihoods (H, K) and the
    updated means (H, K, d) and covariances (H, K, d, d).
    """
    means, covs = message.means, message.covs
    n_r, dim = obs.shape[1], obs.shape[2]
    predicted_y = np.einsum("hrd,kd->hkr", obs, means)
    cov_ht = np.einsum("kde,hse->hkds", covs, obs)
    innovation_cov = np.einsum("hrd,hkds->hkrs", obs, cov_ht) + sigma_n2 * np.eye(n_r)
    innovation_cov = _hermitian(innovation_cov)
    residual = y[None, None, :] - predicted_y

    gain = np.conj(np.swapaxes(np.linalg.solve(innovation_cov, np.conj(np.swapaxes(cov_ht, -1, -2))), -1, -2))
    new_means = means[None] + np.einsum("hkds,hks->hkd", gain, residual)
    # Joseph form keeps the covariance Hermitian PSD.
    i_kh = np.eye(dim) - np.einsum("hkds,hse->hkde", gain, obs)
    new_covs = (
        i_kh @ covs[None] @ np.conj(np.swapaxes(i_kh, -1, -2))
        + sigma_n2 * gain @ np.conj(np.swapaxes(gain, -1, -2))
    )
    new_covs = _hermitian(new_covs)

    _, logdet = np.linalg.slogdet(innovation_cov)
    whitened = np.linalg.solve(innovation_cov, residual[..., None])[..., 0]
    quad = np.real(np.einsum("hkr,hkr->hk", np.conj(residual), whitened))
    loglik = -n_r * np.log(np.pi) - np.real(logdet) - quad
    return loglik, new_means, new_covs


def _normalize(log_weights: np.ndarray, time_index: int, stage: str) -> np.ndarray:
    total = logsumexp(log_weights)
    if not np.isfinite(total):
        raise DegenerateMessageError("all message weights vanished", time_index=time_index, stage=stage)
    return log_weights - total


def _step(message: _Message, y: np.ndarray, hyps: _Hypotheses, model: ChannelModel,
          k_max: int | None, time_index: int, stage: str) -> _Message:
    """Measurement update under all hypotheses, pruning, then AR(1) prediction."""
    obs = _observation_matrices(hyps.values, model.n_r)
    loglik, means, covs = _kalman_update(message, y, obs, model.noise.sigma_n2)
    log_weights = message.log_weights[None, :] + hyps.log_prior[:, None] + loglik
    dim = model.dim
    log_weights = _normalize(log_weights.ravel(), time_index, stage)
    means = means.reshape(-1, dim)
    covs = covs.reshape(-1, dim, dim)

    keep = _top_indices(log_weights, k_max)
    log_weights = _normalize(log_weights[keep], time_index, stage)
    means, covs = means[keep], covs[keep]

    a = model.transition
    means = means * a
    covs = covs * np.outer(a, a) + np.diag(model.innovation)
    return _Message(log_weights, means, _hermitian(covs))


def _stationary_message(model: ChannelModel) -> _Message:
    return _Message(
        log_weights=np.zeros(1),
        means=np.zeros((1, model.dim), dtype=complex),
        covs=np.diag(model.stationary).astype(complex)[None],
    )


def _predictive_messages(y: np.ndarray, hyps: list[_Hypotheses], model: ChannelModel,
                         k_max: int | None, stage: str) -> Iterator[_Message]:
    """Yield p(s_i | y_1..y_{i-1}) for i = 1..l (stationary law first)."""
    message = _stationary_message(model)
    for i in range(y.shape[0]):
        yield message
        message = _step(message, y[i], hyps[i], model, k_max, i, stage)


def _check_inputs(y: ReceivedFrame, priors: SymbolPrior, model: ChannelModel, k_max: int | None):
    _check_budget(k_max)
    if len(y) == 0:
        raise ShapeError("received frame is empty")
    if len(priors) != len(y):
        raise ShapeError(f"priors cover {len(priors)} symbols, received frame has {len(y)}")
    if y.n_r != model.n_r:
        raise ShapeError(f"received frame has {y.n_r} antennas, model expects {model.n_r}")


def forward_messages(y: ReceivedFrame, priors: SymbolPrior, model: ChannelModel,
                     k_max: int | None = 8) -> list[GaussianMixture]:
    """Forward predictive messages as mixtures, mainly for inspection and tests."""
    _check_inputs(y, priors, model, k_max)
    hyps = _hypotheses(priors)
    return [m.as_mixture() for m in _predictive_messages(y.y, hyps, model, k_max, "forward")]


def _combine(fwd: _Message, rev: _Message, y: np.ndarray, hyps: _Hypotheses,
             model: ChannelModel, time_index: int):
    """
    Local belief at one time: hypothesis log-scores and the channel posterior moments.
    """
    obs = _observation_matrices(hyps.values, model.n_r)
    loglik, upd_means, upd_covs = _kalman_update(fwd, y, obs, model.noise.sigma_n2)

    stationary = model.stationary
    prior_info = np.diag(1.0 / stationary)
    upd_info = _hermitian(np.linalg.inv(upd_covs))  # (H, K1, d, d)
    rev_info = _hermitian(np.linalg.inv(rev.covs))  # (K2, d, d)
    upd_eta = np.einsum("hkde,hke->hkd", upd_info, upd_means)
    rev_eta = np.einsum("kde,ke->kd", rev_info, rev.means)

    info = upd_info[:, :, None] + rev_info[None, None] - prior_info
    eta = upd_eta[:, :, None] + rev_eta[None, None]
    post_means = np.linalg.solve(info, eta[..., None])[..., 0]

    _, logdet_upd = np.linalg.slogdet(upd_covs)
    _, logdet_rev = np.linalg.slogdet(rev.covs)
    _, logdet_info = np.linalg.slogdet(info)
    log_overlap = (
        np.sum(np.log(stationary))
        - np.real(logdet_upd)[:, :, None]
        - np.real(logdet_rev)[None, None]
        - np.real(logdet_info)
        + np.real(np.einsum("hkjd,hkjd->hkj", np.conj(eta), post_means))
        - np.real(np.einsum("hkd,hkd->hk", np.conj(upd_means), upd_eta))[:, :, None]
        - np.real(np.einsum("kd,kd->k", np.conj(rev.means), rev_eta))[None, None]
    )
    log_terms = (
        fwd.log_weights[None, :, None]
        + hyps.log_prior[:, None, None]
        + loglik[:, :, None]
        + rev.log_weights[None, None, :]
        + log_overlap
    )
    flat = log_terms.reshape(log_terms.shape[0], -1)
    scores = logsumexp(flat, axis=1)
    total = logsumexp(scores)
    if not np.isfinite(total):
        raise DegenerateMessageError("no symbol hypothesis is consistent with the observation",
                                     time_index=time_index, stage="combine")

    weights = np.exp(log_terms - total)
    post_covs = _hermitian(np.linalg.inv(info))
    mean = np.einsum("hkj,hkjd->d", weights, post_means)
    second = np.einsum("hkj,hkjde->de", weights, post_covs) + np.einsum(
        "hkj,hkjd,hkje->de", weights, post_means, np.conj(post_means)
    )
    cov = _hermitian(second - np.outer(mean, np.conj(mean)))
    return scores - total, mean, cov


def bp_detect(y: ReceivedFrame, priors: SymbolPrior, model: ChannelModel,
              k_max: int | None = 8) -> DetectorPosterior:
    """
    One forward and one reverse sweep of Gaussian-mixture message passing.

    k_max=None disables pruning, which makes the result exact (and
    exponentially expensive in the number of uncertain symbols).
    """
    _check_inputs(y, priors, model, k_max)
    hyps = _hypotheses(priors)
    length = len(y)

    forward = list(_predictive_messages(y.y, hyps, model, k_max, "forward"))
    reverse = list(_predictive_messages(y.y[::-1], hyps[::-1], model, k_max, "reverse"))
    reverse.reverse()

    symbol_pmf = np.zeros((length, 2, 3))
    channel_mean = np.zeros((length, model.dim), dtype=complex)
    channel_cov = np.zeros((length, model.dim, model.dim), dtype=complex)
    extrinsic = np.zeros((length, 2))
    with np.errstate(divide="ignore"):
        log_pmf = np.log(priors.pmf)
    for i in range(length):
        log_scores, mean, cov = _combine(forward[i], reverse[i], y.y[i], hyps[i], model, i)
        joint = np.exp(log_scores)
        values = hyps[i].values
        for user in range(2):
            for column, symbol in enumerate(ALPHABET):
                symbol_pmf[i, user, column] = joint[values[:, user] == symbol].sum()
            plus = values[:, user] == 1.0
            minus = values[:, user] == -1.0
            if plus.any() and minus.any():
                # Scores with the user's own prior factor removed.
                extrinsic[i, user] = (
                    logsumexp(log_scores[plus] - log_pmf[i, user, PLUS])
                    - logsumexp(log_scores[minus] - log_pmf[i, user, MINUS])
                )
        channel_mean[i] = mean
        channel_cov[i] = cov

    return DetectorPosterior(
        symbol_pmf=symbol_pmf,
        channel_mean=channel_mean,
        channel_cov=channel_cov,
        n_r=model.n_r,
        extrinsic=extrinsic,
    )


def _clamped_llr(pmf: np.ndarray) -> np.ndarray:
    p_plus = np.clip(pmf[..., PLUS], PROB_CLAMP, 1.0)
    p_minus = np.clip(pmf[..., MINUS], PROB_CLAMP, 1.0)
    return np.log(p_plus) - np.log(p_minus)


def extrinsic_llrs(posterior: DetectorPosterior, priors: SymbolPrior, user: int = 0,
                   positions: np.ndarray | None = None) -> np.ndarray:
    """
    Extrinsic LLRs log P(+1)/P(-1) of one user, posterior minus prior.

    Taken from the detector's hypothesis scores with the user's own prior
    factor divided out, so the result stays informative when decoder
    feedback has pushed the prior close to a point mass. A point-mass prior
    yields exactly zero. By default only positions whose prior is not a
    point mass are reported.
    """
    if posterior.symbol_pmf.shape != priors.pmf.shape:
        raise ShapeError("posterior and priors are not aligned")
    if positions is None:
        positions = priors.data_positions(user)
    return posterior.extrinsic[positions, user].copy()
