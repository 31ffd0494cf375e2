"""
Tests for Gaussian-mixture message passing: pruning, priors, exactness against
enumeration, and extrinsic information.
"""

import numpy as np
import pytest

from hidex.bp import (
    MINUS,
    PLUS,
    SILENT,
    ChannelModel,
    GaussianMixture,
    MixtureComponent,
    SymbolPrior,
    UserLayout,
    bp_detect,
    extrinsic_llrs,
    forward_messages,
    llrs_to_pmf,
    prune_mixture,
)
from hidex.channel import FadingParams, NoiseParams, ReceivedFrame, cscg
from hidex.errors import DegenerateMessageError, ParameterError, ShapeError
from hidex.framing import PacketSpec, gen_preamble
from hidex.oracle import enumerate_posteriors


def _mixture(weights, dim=2):
    k = len(weights)
    return GaussianMixture(
        weights=np.asarray(weights, dtype=float),
        means=np.arange(k, dtype=complex)[:, None] * np.ones((k, dim)),
        covs=np.repeat(np.eye(dim, dtype=complex)[None], k, axis=0),
    )


def _model(alpha=0.9, power_b=0.5, noise=0.1, n_r=1):
    return ChannelModel(
        fading_a=FadingParams(alpha=alpha, sigma_h2=1.0, n_r=n_r),
        fading_b=FadingParams(alpha=alpha, sigma_h2=power_b, n_r=n_r),
        noise=NoiseParams(sigma_n2=noise),
    )


def _random_prior(rng, length):
    """Both users uncertain everywhere, with a few silent and known symbols mixed in."""
    pmf = np.zeros((length, 2, 3))
    p_plus = rng.uniform(0.1, 0.9, size=(length, 2))
    pmf[:, :, PLUS] = p_plus
    pmf[:, :, MINUS] = 1.0 - p_plus
    pmf[0, 1] = [0.0, 0.0, 1.0]  # second user not yet on the air
    pmf[1, 0] = [0.0, 1.0, 0.0]  # known pilot
    return SymbolPrior(pmf=pmf)


class TestPruneMixture:
    """Tests for top-k component pruning."""

    def test_budget_not_binding(self):
        """Fewer components than the budget only renormalizes."""
        pruned = prune_mixture(_mixture([2.0, 1.0, 1.0]), 8)
        assert np.allclose(pruned.weights, [0.5, 0.25, 0.25])
        assert len(pruned) == 3

    def test_keeps_heaviest(self):
        """(0.5, 0.3, 0.2) with k=2 keeps the first two as (0.625, 0.375)."""
        pruned = prune_mixture(_mixture([0.5, 0.3, 0.2]), 2)
        assert np.allclose(pruned.weights, [0.625, 0.375])
        assert np.allclose(pruned.means[:, 0], [0, 1])

    def test_tie_break_keeps_lower_index(self):
        """Equal weights keep indices 0 and 1."""
        pruned = prune_mixture(_mixture([0.25] * 4), 2)
        assert np.allclose(pruned.means[:, 0], [0, 1])

    def test_preserves_original_order(self):
        """Survivors stay in their original order."""
        pruned = prune_mixture(_mixture([0.1, 0.2, 0.7]), 2)
        assert np.allclose(pruned.means[:, 0], [1, 2])

    def test_zero_weight_is_degenerate(self):
        """All-zero weights cannot be renormalized."""
        with pytest.raises(DegenerateMessageError):
            prune_mixture(_mixture([0.0, 0.0]), 1)

    def test_rejects_zero_budget(self):
        """k_max must be at least 1."""
        with pytest.raises(ParameterError):
            prune_mixture(_mixture([1.0]), 0)

    def test_components_roundtrip(self):
        """from_components inverts components."""
        mix = _mixture([0.6, 0.4])
        again = GaussianMixture.from_components(mix.components)
        assert np.array_equal(again.weights, mix.weights)
        assert isinstance(mix.components[0], MixtureComponent)


class TestSymbolPrior:
    """Tests for prior construction."""

    def test_rejects_bad_shape(self):
        """Priors are (l, 2, 3)."""
        with pytest.raises(ShapeError):
            SymbolPrior(pmf=np.ones((4, 3)))

    def test_rejects_non_pmf(self):
        """Rows must sum to one."""
        pmf = np.zeros((2, 2, 3))
        pmf[:, :, SILENT] = 0.5
        with pytest.raises(ParameterError):
            SymbolPrior(pmf=pmf)

    def test_from_layout(self):
        """Known symbols are point masses, data uniform, silence outside the packet."""
        spec = PacketSpec(preamble_len=4, header_len=0, payload_len=3, pilot_period=4)
        preamble = gen_preamble(4, 1)
        layout = UserLayout.from_spec(spec, preamble, start=2)
        prior = SymbolPrior.from_layout(10, None, layout)
        pmf = prior.pmf[:, 1]
        assert np.all(pmf[:2, SILENT] == 1.0)
        assert np.all(pmf[2 + 8 :, SILENT] == 1.0)
        assert np.all(prior.pmf[:, 0, SILENT] == 1.0)
        assert pmf[2 + 4, PLUS] == 1.0  # pilot
        assert np.allclose(pmf[2 + 5 : 2 + 8, PLUS], 0.5)
        assert prior.data_positions(1).tolist() == [7, 8, 9]

    def test_ignored_pilots_are_uncertain(self):
        """Without pilots only the preamble is known."""
        spec = PacketSpec(preamble_len=4, header_len=0, payload_len=3, pilot_period=4)
        layout = UserLayout.from_spec(spec, gen_preamble(4, 1), use_pilots=False)
        assert np.isnan(layout.known[4:]).all()

    def test_with_data_llrs(self):
        """Replacing priors from LLRs keeps a valid pmf."""
        pmf = np.zeros((3, 2, 3))
        pmf[:, :, PLUS] = pmf[:, :, MINUS] = 0.5
        prior = SymbolPrior(pmf=pmf).with_data_llrs(0, np.array([1]), np.array([np.log(3.0)]))
        assert prior.pmf[1, 0, PLUS] == pytest.approx(0.75)
        assert prior.pmf[0, 0, PLUS] == 0.5

    def test_llrs_to_pmf_clips(self):
        """Huge LLRs saturate at the clip instead of overflowing."""
        pmf = llrs_to_pmf(np.array([0.0, 1e6, -1e6]))
        assert pmf[0, PLUS] == pytest.approx(0.5)
        assert 0.0 < pmf[1, MINUS] < 1e-12
        assert 0.0 < pmf[2, PLUS] < 1e-12


class TestBpDetectExactness:
    """Unpruned message passing against brute-force enumeration."""

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_enumeration(self, seed):
        """Total variation below 1e-9 for l = 6 without pruning."""
        rng = np.random.default_rng(seed)
        model = _model(alpha=0.9, power_b=0.7, noise=0.2)
        prior = _random_prior(rng, 6)
        y = ReceivedFrame(y=cscg(rng, (6, 1), 1.5))
        posterior = bp_detect(y, prior, model, k_max=None)
        oracle = enumerate_posteriors(y, prior, model)
        tv = 0.5 * np.abs(posterior.symbol_pmf - oracle).sum(axis=2)
        assert tv.max() < 1e-9

    def test_matches_enumeration_two_antennas(self, rng):
        """Exactness holds with two receive antennas."""
        model = _model(alpha=0.8, power_b=1.0, noise=0.3, n_r=2)
        prior = _random_prior(rng, 5)
        y = ReceivedFrame(y=cscg(rng, (5, 2), 1.5))
        posterior = bp_detect(y, prior, model, k_max=None)
        oracle = enumerate_posteriors(y, prior, model)
        assert np.abs(posterior.symbol_pmf - oracle).max() < 1e-9

    def test_oracle_refuses_long_frames(self, rng):
        """Enumeration beyond its limit is refused."""
        prior = _random_prior(rng, 11)
        y = ReceivedFrame(y=cscg(rng, (11, 1), 1.0))
        with pytest.raises(ParameterError):
            enumerate_posteriors(y, prior, _model())


class TestBpDetect:
    """Structural properties of the detector."""

    def test_posteriors_are_pmfs(self, rng):
        """Every posterior row sums to one."""
        prior = _random_prior(rng, 12)
        y = ReceivedFrame(y=cscg(rng, (12, 1), 1.0))
        posterior = bp_detect(y, prior, _model(), k_max=4)
        assert np.allclose(posterior.symbol_pmf.sum(axis=2), 1.0)
        assert np.all(np.isfinite(posterior.channel_mean))

    def test_forward_messages_normalized_and_psd(self, rng):
        """Weights sum to one and covariances stay Hermitian PSD."""
        prior = _random_prior(rng, 15)
        y = ReceivedFrame(y=cscg(rng, (15, 1), 1.0))
        for mix in forward_messages(y, prior, _model(alpha=0.99, noise=0.01), k_max=8):
            assert abs(mix.weights.sum() - 1.0) < 1e-12
            assert len(mix) <= 8
            assert np.allclose(mix.covs, np.conj(np.swapaxes(mix.covs, -1, -2)))
            assert np.linalg.eigvalsh(mix.covs).min() >= -1e-10

    def test_channel_covariance_psd(self, rng):
        """Posterior channel covariances are PSD."""
        prior = _random_prior(rng, 10)
        y = ReceivedFrame(y=cscg(rng, (10, 1), 1.0))
        posterior = bp_detect(y, prior, _model(), k_max=4)
        assert np.linalg.eigvalsh(posterior.channel_cov).min() >= -1e-10
        assert np.all(posterior.channel_error >= -1e-10)

    def test_tracks_constant_channel_from_pilots(self):
        """All-pilot single-user frame with a frozen channel recovers h."""
        h = 0.7 - 0.4j
        length = 20
        pmf = np.zeros((length, 2, 3))
        pmf[:, 0, PLUS] = 1.0
        pmf[:, 1, SILENT] = 1.0
        y = ReceivedFrame(y=np.full((length, 1), h))
        model = _model(alpha=1.0, noise=1e-6)
        posterior = bp_detect(y, SymbolPrior(pmf=pmf), model, k_max=8)
        assert np.allclose(posterior.channel(0)[:, 0], h, atol=1e-3)

    def test_decisions(self):
        """+1 wins ties; silent users decide 0."""
        pmf = np.zeros((2, 2, 3))
        pmf[:, 0, PLUS] = pmf[:, 0, MINUS] = 0.5
        pmf[:, 1, SILENT] = 1.0
        y = ReceivedFrame(y=np.zeros((2, 1), dtype=complex))
        posterior = bp_detect(y, SymbolPrior(pmf=pmf), _model(), k_max=4)
        assert posterior.decisions.tolist() == [[1.0, 0.0], [1.0, 0.0]]

    def test_rejects_empty_frame(self):
        """An empty frame has nothing to detect."""
        y = ReceivedFrame(y=np.zeros((0, 1), dtype=complex))
        with pytest.raises(ShapeError):
            bp_detect(y, SymbolPrior(pmf=np.zeros((0, 2, 3))), _model())

    def test_rejects_misaligned_priors(self, rng):
        """Priors must cover the frame."""
        y = ReceivedFrame(y=cscg(rng, (5, 1), 1.0))
        with pytest.raises(ShapeError):
            bp_detect(y, _random_prior(rng, 4), _model())

    def test_rejects_zero_budget(self, rng):
        """k_max must be at least 1."""
        y = ReceivedFrame(y=cscg(rng, (4, 1), 1.0))
        with pytest.raises(ParameterError):
            bp_detect(y, _random_prior(rng, 4), _model(), k_max=0)


class TestExtrinsicLlrs:
    """Tests for detector extrinsic information."""

    def test_uniform_prior_equals_posterior(self, rng):
        """With a uniform prior the extrinsic is the posterior LLR."""
        pmf = np.zeros((8, 2, 3))
        pmf[:, :, PLUS] = pmf[:, :, MINUS] = 0.5
        prior = SymbolPrior(pmf=pmf)
        y = ReceivedFrame(y=cscg(rng, (8, 1), 1.0))
        posterior = bp_detect(y, prior, _model(noise=0.5), k_max=None)
        assert np.allclose(extrinsic_llrs(posterior, prior, 0), posterior.llrs(0), atol=1e-9)

    def test_recombines_with_prior(self, rng):
        """Extrinsic plus prior LLR gives the posterior LLR."""
        prior = _random_prior(rng, 7)
        y = ReceivedFrame(y=cscg(rng, (7, 1), 1.0))
        posterior = bp_detect(y, prior, _model(noise=0.5), k_max=None)
        for user in (0, 1):
            positions = prior.data_positions(user)
            pmf = prior.pmf[positions, user]
            prior_llr = np.log(pmf[:, PLUS]) - np.log(pmf[:, MINUS])
            post = posterior.symbol_pmf[positions, user]
            post_llr = np.log(post[:, PLUS]) - np.log(post[:, MINUS])
            ext = extrinsic_llrs(posterior, prior, user)
            assert np.allclose(ext + prior_llr, post_llr, atol=1e-9)

    def test_point_mass_prior_gives_zero(self, rng):
        """A known symbol carries no extrinsic information."""
        prior = _random_prior(rng, 5)
        y = ReceivedFrame(y=cscg(rng, (5, 1), 1.0))
        posterior = bp_detect(y, prior, _model(), k_max=None)
        assert extrinsic_llrs(posterior, prior, 0, np.array([1])).tolist() == [0.0]

    def test_survives_saturated_priors(self, rng):
        """Near-certain priors still leave finite, informative extrinsic values."""
        pmf = np.zeros((6, 2, 3))
        pmf[:, 0] = llrs_to_pmf(np.full(6, 30.0))
        pmf[:, 1, SILENT] = 1.0
        prior = SymbolPrior(pmf=pmf)
        # Observations consistent with x = -1 on a known-ish channel.
        y = ReceivedFrame(y=np.full((6, 1), -1.0 + 0j))
        posterior = bp_detect(y, prior, _model(alpha=0.99, noise=0.05), k_max=8)
        ext = extrinsic_llrs(posterior, prior, 0)
        assert np.all(np.isfinite(ext))
        assert np.any(np.abs(ext) > 1.0)

    def test_rejects_misaligned(self, rng):
        """Posterior and prior must describe the same window."""
        prior = _random_prior(rng, 5)
        y = ReceivedFrame(y=cscg(rng, (5, 1), 1.0))
        posterior = bp_detect(y, prior, _model(), k_max=2)
        with pytest.raises(ShapeError):
            extrinsic_llrs(posterior, _random_prior(rng, 6), 0)
