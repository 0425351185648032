"""Tests for the particle-flow assimilation module."""

import numpy as np
import pytest

from driftbench.data import substream
from driftbench.kalman import GaussianBelief, generic_lkf_step
from driftbench.numerics import InversionError, is_psd, sym_inverse, symmetrize
from driftbench.pflow import (
    FlowConfig,
    LikelihoodSpec,
    ParticleEnsemble,
    PriorSpec,
    _flow_diffusion,
    _propagate_ensemble,
    diffusion_cov,
    drift,
    estimate_prior,
    flow_step,
    pff_assimilate,
    pff_run,
)
from driftbench.statespace import Observation, State, SystemMatrices, step_state

from conftest import random_spd


def identity_system() -> SystemMatrices:
    eye = np.eye(2)
    return SystemMatrices(
        phi=eye, drift=np.zeros(2), cct=eye, cct_chol=eye, h=eye, v=eye, v2=eye
    )


class TestParticleEnsemble:
    def test_shape_and_counts(self):
        ens = ParticleEnsemble(np.zeros((7, 2)))
        assert ens.n == 7
        assert ens.dim == 2

    def test_rejects_flat_array(self):
        with pytest.raises(ValueError):
            ParticleEnsemble(np.zeros(4))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            ParticleEnsemble(np.zeros((0, 2)))


class TestFlowConfig:
    def test_defaults(self):
        cfg = FlowConfig()
        assert cfg.n_particles == 1000
        assert cfg.d_lambda == 0.01
        assert cfg.scheme == "implicit"
        assert cfg.diffusion is True
        assert cfg.sigma2_scale == 4.0
        assert cfg.n_lambda_steps == 100

    def test_step_count(self):
        assert FlowConfig(d_lambda=0.2).n_lambda_steps == 5
        assert FlowConfig(d_lambda=1.0).n_lambda_steps == 1

    def test_third_is_close_enough_to_integral(self):
        # 1/3 rounds to 0.333...; three steps land within 1e-16 of 1
        cfg = FlowConfig(d_lambda=1.0 / 3.0)
        assert cfg.n_lambda_steps == 3

    def test_rejects_non_integral_grid(self):
        with pytest.raises(ValueError, match="whole steps"):
            FlowConfig(d_lambda=0.013)

    def test_rejects_out_of_range_step(self):
        for bad in (0.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                FlowConfig(d_lambda=bad)

    def test_rejects_bad_scheme(self):
        with pytest.raises(ValueError, match="scheme"):
            FlowConfig(scheme="midpoint")

    def test_rejects_bad_counts_and_scales(self):
        with pytest.raises(ValueError):
            FlowConfig(n_particles=0)
        with pytest.raises(ValueError):
            FlowConfig(sigma2_scale=0.0)


class TestEstimatePrior:
    def test_identical_particles(self):
        ens = ParticleEnsemble(np.tile([1.5, -0.2], (6, 1)))
        prior = estimate_prior(ens)
        assert np.allclose(prior.mean, [1.5, -0.2])
        assert np.linalg.norm(prior.cov) < 1e-10

    def test_two_particles_unbiased(self):
        prior = estimate_prior(ParticleEnsemble(np.array([[0.0, 0.0], [2.0, 0.0]])))
        assert np.allclose(prior.mean, [1.0, 0.0])
        assert np.allclose(prior.cov, [[2.0, 0.0], [0.0, 0.0]])

    def test_large_sample_recovers_standard_normal(self):
        draws = np.random.default_rng(42).standard_normal((100_000, 2))
        prior = estimate_prior(ParticleEnsemble(draws))
        assert np.linalg.norm(prior.mean) < 0.02
        assert np.abs(prior.cov - np.eye(2)).max() < 0.03

    def test_single_particle_rejected(self):
        with pytest.raises(ValueError, match="two particles"):
            estimate_prior(ParticleEnsemble(np.zeros((1, 2))))

    def test_cov_is_symmetric_psd(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            ens = ParticleEnsemble(rng.standard_normal((30, 2)) * [3.0, 0.5])
            prior = estimate_prior(ens)
            assert np.array_equal(prior.cov, prior.cov.T)
            assert is_psd(prior.cov)


class TestDrift:
    def test_likelihood_mean_is_fixed_point(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            prior = PriorSpec(rng.standard_normal(2), random_spd(rng))
            lik = LikelihoodSpec(rng.standard_normal(2), random_spd(rng))
            for lam in (0.0, 0.25, 0.5, 0.75, 1.0):
                assert np.linalg.norm(drift(lik.mean, lam, prior, lik)) == 0.0

    def test_unit_covariances_at_lambda_zero(self):
        prior = PriorSpec(np.zeros(2), np.eye(2))
        lik = LikelihoodSpec(np.zeros(2), np.eye(2))
        f = drift(np.array([1.0, 0.0]), 0.0, prior, lik)
        assert np.allclose(f, [-1.0, 0.0], atol=1e-12)

    def test_unit_covariances_at_lambda_one(self):
        prior = PriorSpec(np.zeros(2), np.eye(2))
        lik = LikelihoodSpec(np.zeros(2), np.eye(2))
        f = drift(np.array([1.0, 0.0]), 1.0, prior, lik)
        assert np.allclose(f, [-0.5, 0.0], atol=1e-12)

    def test_lambda_out_of_range(self):
        prior = PriorSpec(np.zeros(2), np.eye(2))
        lik = LikelihoodSpec(np.zeros(2), np.eye(2))
        for lam in (-0.1, 1.1):
            with pytest.raises(ValueError):
                drift(np.zeros(2), lam, prior, lik)

    def test_degenerate_prior_still_finite(self):
        # a collapsed ensemble gives Sigma1 = 0; the jittered inverse turns
        # the pull-through matrix into nearly zero rather than blowing up
        prior = PriorSpec(np.zeros(2), np.zeros((2, 2)))
        lik = LikelihoodSpec(np.zeros(2), np.eye(2))
        f = drift(np.array([5.0, -3.0]), 0.5, prior, lik)
        assert np.all(np.isfinite(f))
        assert np.linalg.norm(f) < 1e-3


class TestDiffusionCov:
    def test_lambda_zero_unit_case(self):
        q = diffusion_cov(0.0, np.eye(2), identity_system())
        assert np.allclose(q, np.eye(2), atol=1e-12)

    def test_lambda_one_unit_case(self):
        q = diffusion_cov(1.0, np.eye(2), identity_system())
        assert np.allclose(q, 0.25 * np.eye(2), atol=1e-12)

    def test_zero_prior_covariance(self):
        q = diffusion_cov(0.7, np.zeros((2, 2)), identity_system())
        assert np.allclose(q, 0.0)

    def test_symmetric_and_psd_on_random_input(self, model):
        rng = np.random.default_rng(23)
        for _ in range(25):
            p = random_spd(rng)
            for lam in (0.0, 0.25, 0.5, 0.75, 1.0):
                q = diffusion_cov(lam, p, model)
                assert np.array_equal(q, q.T)
                assert is_psd(q)

    def test_lambda_out_of_range(self):
        with pytest.raises(ValueError):
            diffusion_cov(1.2, np.eye(2), identity_system())

    def test_singular_measurement_covariance(self):
        m = identity_system()
        broken = SystemMatrices(
            phi=m.phi, drift=m.drift, cct=m.cct, cct_chol=m.cct_chol,
            h=m.h, v=np.zeros((2, 2)), v2=np.zeros((2, 2)),
        )
        with pytest.raises(InversionError):
            diffusion_cov(0.5, np.eye(2), broken)


class TestFlowStep:
    def test_scalar_implicit_oracle(self):
        """One implicit step of the scalar unit-covariance flow."""
        ens = ParticleEnsemble(np.array([[1.5]]))
        prior = PriorSpec(np.array([0.7]), np.array([[1.0]]))
        lik = LikelihoodSpec(np.array([0.5]), np.array([[1.0]]))
        cfg = FlowConfig(n_particles=1, d_lambda=0.1, scheme="implicit", diffusion=False)
        out = flow_step(ens, 0.1, prior, lik, np.eye(1), cfg)
        expected = 1.0 / (1.0 + 0.1 / 1.1)
        assert out.particles[0, 0] - 0.5 == pytest.approx(expected, abs=1e-12)

    def test_mean_fixed_under_both_schemes(self):
        prior = PriorSpec(np.zeros(2), np.eye(2))
        lik = LikelihoodSpec(np.array([2.0, -1.0]), np.eye(2))
        ens = ParticleEnsemble(np.tile(lik.mean, (4, 1)))
        for scheme in ("explicit", "implicit"):
            cfg = FlowConfig(n_particles=4, d_lambda=0.25, scheme=scheme, diffusion=False)
            out = flow_step(ens, 0.5, prior, lik, np.eye(2), cfg)
            assert np.allclose(out.particles, ens.particles, atol=1e-14)

    def test_explicit_matches_hand_euler(self):
        rng = np.random.default_rng(3)
        prior = PriorSpec(rng.standard_normal(2), random_spd(rng))
        lik = LikelihoodSpec(rng.standard_normal(2), random_spd(rng))
        particles = rng.standard_normal((5, 2))
        cfg = FlowConfig(n_particles=5, d_lambda=0.1, scheme="explicit", diffusion=False)
        out = flow_step(ParticleEnsemble(particles), 0.3, prior, lik, np.eye(2), cfg)
        s1i, s2i = sym_inverse(prior.cov), sym_inverse(lik.cov)
        b = sym_inverse(symmetrize(s1i + 0.2 * s2i)) @ s2i
        for i in range(5):
            expected = particles[i] - 0.1 * (b @ (particles[i] - lik.mean))
            assert np.allclose(out.particles[i], expected, atol=1e-12)

    def test_implicit_matches_hand_resolvent(self):
        rng = np.random.default_rng(4)
        prior = PriorSpec(rng.standard_normal(2), random_spd(rng))
        lik = LikelihoodSpec(rng.standard_normal(2), random_spd(rng))
        particles = rng.standard_normal((5, 2))
        cfg = FlowConfig(n_particles=5, d_lambda=0.1, scheme="implicit", diffusion=False)
        out = flow_step(ParticleEnsemble(particles), 0.3, prior, lik, np.eye(2), cfg)
        s1i, s2i = sym_inverse(prior.cov), sym_inverse(lik.cov)
        b = sym_inverse(symmetrize(s1i + 0.3 * s2i)) @ s2i
        resolvent = np.linalg.inv(np.eye(2) + 0.1 * b)
        for i in range(5):
            expected = resolvent @ (particles[i] - lik.mean) + lik.mean
            assert np.allclose(out.particles[i], expected, atol=1e-12)

    def test_small_step_moves_little(self):
        """Drift plus a 3-sigma diffusion kick bounds a tiny lambda step."""
        rng = np.random.default_rng(9)
        prior = PriorSpec(np.zeros(2), random_spd(rng))
        lik = LikelihoodSpec(np.ones(2), random_spd(rng))
        x = np.array([[0.4, -1.3]])
        cfg = FlowConfig(n_particles=1, d_lambda=1e-6, scheme="implicit", diffusion=True)
        p = random_spd(rng)
        out = flow_step(ParticleEnsemble(x), 1e-6, prior, lik, p, cfg,
                        rng=np.random.default_rng(0))
        f = drift(x[0], 0.0, prior, lik)
        q = _flow_diffusion(0.0, p, lik.cov)
        l_norm = np.linalg.norm(np.linalg.cholesky(q + 1e-30 * np.eye(2)))
        bound = 2.0 * (np.linalg.norm(f) * 1e-6 + l_norm * 3e-3)
        assert np.linalg.norm(out.particles[0] - x[0]) <= bound

    def test_diffusion_needs_generator(self):
        ens = ParticleEnsemble(np.zeros((2, 2)))
        prior = PriorSpec(np.zeros(2), np.eye(2))
        lik = LikelihoodSpec(np.zeros(2), np.eye(2))
        cfg = FlowConfig(n_particles=2, d_lambda=0.5, diffusion=True)
        with pytest.raises(ValueError, match="generator"):
            flow_step(ens, 0.5, prior, lik, np.eye(2), cfg)

    def test_lambda_next_validation(self):
        ens = ParticleEnsemble(np.zeros((2, 2)))
        prior = PriorSpec(np.zeros(2), np.eye(2))
        lik = LikelihoodSpec(np.zeros(2), np.eye(2))
        cfg = FlowConfig(n_particles=2, d_lambda=0.5, diffusion=False)
        for bad in (0.0, 1.2, 0.25):
            with pytest.raises(ValueError):
                flow_step(ens, bad, prior, lik, np.eye(2), cfg)

    def test_kicks_reproducible(self):
        ens = ParticleEnsemble(np.zeros((8, 2)))
        prior = PriorSpec(np.zeros(2), np.eye(2))
        lik = LikelihoodSpec(np.ones(2), np.eye(2))
        cfg = FlowConfig(n_particles=8, d_lambda=0.1, diffusion=True)
        a = flow_step(ens, 0.1, prior, lik, np.eye(2), cfg, rng=np.random.default_rng(5))
        b = flow_step(ens, 0.1, prior, lik, np.eye(2), cfg, rng=np.random.default_rng(5))
        assert np.array_equal(a.particles, b.particles)


class TestContraction:
    def test_implicit_flow_contracts_toward_likelihood_mean(self):
        """With equal covariances every deterministic implicit step shrinks
        the distance to the likelihood center."""
        rng = np.random.default_rng(31)
        for _ in range(10):
            cov = random_spd(rng)
            prior = PriorSpec(rng.standard_normal(2), cov)
            lik = LikelihoodSpec(rng.standard_normal(2), cov.copy())
            cfg = FlowConfig(n_particles=3, d_lambda=0.1, scheme="implicit", diffusion=False)
            ens = ParticleEnsemble(lik.mean + rng.standard_normal((3, 2)))
            for k in range(1, 11):
                before = np.linalg.norm(ens.particles - lik.mean, axis=1)
                ens = flow_step(ens, k * 0.1, prior, lik, cov, cfg)
                after = np.linalg.norm(ens.particles - lik.mean, axis=1)
                assert np.all(after < before)


class TestSchemeConsistency:
    def test_endpoint_gap_halves_with_step(self):
        """Implicit and explicit endpoints close at first order in the step."""
        rng = np.random.default_rng(7)
        mu = np.array([1.0, -0.5])
        s1 = np.array([[0.8, 0.3], [0.3, 1.2]])
        m_lik = np.array([2.0, 0.7])
        s2 = np.array([[0.5, -0.1], [-0.1, 0.9]])
        draws = rng.multivariate_normal(mu, s1, size=200)
        lik = LikelihoodSpec(m_lik, s2)

        def endpoint(scheme, dl):
            cfg = FlowConfig(n_particles=200, d_lambda=dl, scheme=scheme, diffusion=False)
            final = pff_assimilate(ParticleEnsemble(draws), lik, s1, cfg)
            return estimate_prior(final).mean

        gaps = {}
        for dl in (1e-2, 5e-3):
            gaps[dl] = np.linalg.norm(endpoint("implicit", dl) - endpoint("explicit", dl))
        assert gaps[1e-2] / gaps[5e-3] >= 1.8


class TestPffAssimilate:
    def test_flat_likelihood_moves_nothing(self, model):
        """Scaling the likelihood covariance by 1e12 freezes the ensemble."""
        rng = np.random.default_rng(3)
        cloud = rng.multivariate_normal([2.0, 0.3], 0.05 * np.eye(2), size=400)
        cfg = FlowConfig(n_particles=400, d_lambda=0.01, diffusion=False, sigma2_scale=1e12)
        lik = LikelihoodSpec(np.array([2.1, 0.25]), cfg.sigma2_scale * model.v2)
        out = pff_assimilate(ParticleEnsemble(cloud), lik, 0.05 * np.eye(2), cfg)
        assert np.abs(out.particles - cloud).max() < 1e-6
        for lam in (0.0, 0.5, 1.0):
            q = _flow_diffusion(lam, 0.05 * np.eye(2), lik.cov)
            assert np.linalg.norm(q) < 1e-9

    def test_single_particle_rejected(self):
        cfg = FlowConfig(n_particles=1, d_lambda=0.5, diffusion=False)
        lik = LikelihoodSpec(np.zeros(2), np.eye(2))
        with pytest.raises(ValueError):
            pff_assimilate(ParticleEnsemble(np.zeros((1, 2))), lik, np.eye(2), cfg)

    def test_yields_clamped_after_sweep(self):
        rng = np.random.default_rng(8)
        cloud = rng.multivariate_normal([0.5, 0.0], 0.2 * np.eye(2), size=300)
        lik = LikelihoodSpec(np.array([-5.0, 0.0]), 0.01 * np.eye(2))
        cfg = FlowConfig(n_particles=300, d_lambda=0.05, diffusion=False)
        out = pff_assimilate(ParticleEnsemble(cloud), lik, 0.2 * np.eye(2), cfg)
        assert np.all(out.particles[:, 0] >= 1e-8)

    def test_same_seed_identical(self):
        rng = np.random.default_rng(12)
        cloud = rng.standard_normal((100, 2))
        lik = LikelihoodSpec(np.array([1.0, 1.0]), np.eye(2))
        cfg = FlowConfig(n_particles=100, d_lambda=0.1, diffusion=True, seed=77)
        a = pff_assimilate(ParticleEnsemble(cloud), lik, np.eye(2), cfg)
        b = pff_assimilate(ParticleEnsemble(cloud), lik, np.eye(2), cfg)
        assert np.array_equal(a.particles, b.particles)


class TestGaussianProductTransport:
    """The flow against the closed-form product of two Gaussians."""

    mu = np.array([1.0, -0.5])
    s1 = np.array([[0.8, 0.3], [0.3, 1.2]])
    m_lik = np.array([2.0, 0.7])
    s2 = np.array([[0.5, -0.1], [-0.1, 0.9]])

    def posterior(self):
        s1i, s2i = sym_inverse(self.s1), sym_inverse(self.s2)
        s_post = sym_inverse(s1i + s2i)
        m_post = s_post @ (s1i @ self.mu + s2i @ self.m_lik)
        return m_post, s_post, s1i

    def test_deterministic_flow_mean_is_exact(self):
        draws = np.random.default_rng(123).multivariate_normal(self.mu, self.s1, size=10_000)
        cfg = FlowConfig(n_particles=10_000, d_lambda=1e-3, scheme="implicit", diffusion=False)
        final = pff_assimilate(ParticleEnsemble(draws), LikelihoodSpec(self.m_lik, self.s2),
                               self.s1, cfg)
        fit = estimate_prior(final)
        m_post, _, _ = self.posterior()
        gap = np.linalg.norm(m_post - self.mu)
        assert np.linalg.norm(fit.mean - m_post) <= 0.02 * gap

    def test_deterministic_flow_understates_covariance(self):
        """Without diffusion the endpoint spread is the doubly contracted
        Sigma_post Sigma1^-1 Sigma_post, well short of Sigma_post itself.
        The diffusion term exists precisely to repair this."""
        draws = np.random.default_rng(123).multivariate_normal(self.mu, self.s1, size=10_000)
        cfg = FlowConfig(n_particles=10_000, d_lambda=1e-3, scheme="implicit", diffusion=False)
        final = pff_assimilate(ParticleEnsemble(draws), LikelihoodSpec(self.m_lik, self.s2),
                               self.s1, cfg)
        fit = estimate_prior(final)
        m_post, s_post, s1i = self.posterior()
        contracted = s_post @ s1i @ s_post
        ref = np.linalg.norm(s_post)
        assert np.linalg.norm(fit.cov - contracted) <= 0.02 * ref
        assert np.linalg.norm(fit.cov - s_post) > 0.5 * ref

    def test_stochastic_flow_recovers_covariance(self):
        draws = np.random.default_rng(901).multivariate_normal(self.mu, self.s1, size=10_000)
        cfg = FlowConfig(n_particles=10_000, d_lambda=1e-3, scheme="implicit", diffusion=True)
        final = pff_assimilate(ParticleEnsemble(draws), LikelihoodSpec(self.m_lik, self.s2),
                               self.s1, cfg, rng=np.random.default_rng(41))
        fit = estimate_prior(final)
        m_post, s_post, _ = self.posterior()
        gap = np.linalg.norm(m_post - self.mu)
        assert np.linalg.norm(fit.mean - m_post) <= 0.03 * gap
        assert np.linalg.norm(fit.cov - s_post) <= 0.05 * np.linalg.norm(s_post)


class TestPropagation:
    def test_vectorized_matches_scalar_transition(self, model):
        rng = np.random.default_rng(19)
        particles = np.abs(rng.standard_normal((40, 2))) * [3.0, 1.0]
        noise = rng.standard_normal((40, 2))
        moved = _propagate_ensemble(model, particles, noise)
        for i in range(40):
            single = step_state(model, State(particles[i, 0], particles[i, 1]), noise[i])
            assert np.allclose(moved[i], single.as_vector(), atol=1e-12)


class TestPffRun:
    def test_one_summary_per_observation(self, model):
        obs = _simulated_observations(model, 65)
        cfg = FlowConfig(n_particles=200, d_lambda=0.05, seed=3)
        summaries = pff_run(model, obs, cfg)
        assert len(summaries) == 65
        for belief in summaries:
            assert isinstance(belief, GaussianBelief)
            assert np.all(np.isfinite(belief.mean))

    def test_bitwise_reproducible(self, model):
        obs = _simulated_observations(model, 20)
        cfg = FlowConfig(n_particles=150, d_lambda=0.05, seed=11)
        first = pff_run(model, obs, cfg)
        second = pff_run(model, obs, cfg)
        for a, b in zip(first, second):
            assert np.array_equal(a.mean, b.mean)
            assert np.array_equal(a.cov, b.cov)

    def test_seed_changes_output(self, model):
        obs = _simulated_observations(model, 10)
        a = pff_run(model, obs, FlowConfig(n_particles=150, d_lambda=0.1, seed=1))
        b = pff_run(model, obs, FlowConfig(n_particles=150, d_lambda=0.1, seed=2))
        assert any(not np.array_equal(x.mean, y.mean) for x, y in zip(a, b))

    def test_requires_observations_and_particles(self, model):
        with pytest.raises(ValueError):
            pff_run(model, [], FlowConfig())
        with pytest.raises(ValueError):
            pff_run(model, _simulated_observations(model, 2), FlowConfig(n_particles=1))

    def test_step_index_in_errors(self, model):
        broken = SystemMatrices(
            phi=model.phi, drift=model.drift, cct=model.cct, cct_chol=model.cct_chol,
            h=model.h, v=np.zeros((2, 2)), v2=np.zeros((2, 2)),
        )
        obs = _simulated_observations(model, 3)
        with pytest.raises(InversionError, match="step 0"):
            pff_run(broken, obs, FlowConfig(n_particles=50, d_lambda=0.5))

    def test_likelihood_scale_loosens_tracking(self, model):
        # widening the likelihood weakens the pull toward each observation,
        # so the posterior means should sit farther from the data as the
        # scale steps through 1, 4, 16
        obs = _simulated_observations(model, 40)
        ys = np.array([o.as_vector() for o in obs])
        weights = np.abs(np.diag(model.v))
        tracking = []
        for scale in (1.0, 4.0, 16.0):
            cfg = FlowConfig(n_particles=400, d_lambda=0.01,
                             sigma2_scale=scale, seed=7)
            means = np.array([b.mean for b in pff_run(model, obs, cfg)])
            tracking.append(np.sqrt(np.mean(((means - ys) / weights) ** 2)))
        assert np.all(np.isfinite(tracking))
        assert tracking[0] < tracking[1] < tracking[2]


class TestAgainstLinearFilter:
    def test_linear_variant_tracks_kalman_within_ensemble_error(self, model):
        """On a frozen-volatility linear twin of the model, ensemble means
        stay within three standard errors of the exact filter."""
        xbar = 2.0
        q_proc = xbar * model.cct
        l_q = np.linalg.cholesky(symmetrize(q_proc) + 1e-15 * np.eye(2))
        rng = np.random.default_rng(11)
        z = np.array([2.0, 0.4])
        observations = []
        for _ in range(8):
            z = model.phi @ z + model.drift + l_q @ rng.standard_normal(2)
            observations.append(Observation(*(z + model.v @ rng.standard_normal(2))))

        belief = GaussianBelief(observations[0].as_vector(), model.v2)
        kf_means = []
        for y in observations:
            _, _, shifted = generic_lkf_step(
                model.phi, q_proc, np.eye(2), model.v2,
                belief, y.as_vector() - model.drift,
            )
            belief = GaussianBelief(shifted.mean + model.drift, shifted.cov)
            kf_means.append(belief.mean)

        seed, n_part = 9, 600
        cfg = FlowConfig(n_particles=n_part, d_lambda=1e-3, seed=seed, sigma2_scale=1.0)
        parts = observations[0].as_vector() + (
            substream(seed, "pff_init", 0).standard_normal((n_part, 2)) @ np.abs(model.v).T
        )
        summary = estimate_prior(ParticleEnsemble(parts))
        for n, y in enumerate(observations):
            noise = substream(seed, "pff_propagate", n).standard_normal((n_part, 2))
            parts = parts @ model.phi.T + model.drift + noise @ l_q.T
            p_minus = symmetrize(model.phi @ summary.cov @ model.phi.T + q_proc)
            ens = pff_assimilate(
                ParticleEnsemble(parts), LikelihoodSpec(y.as_vector(), model.v2),
                p_minus, cfg, rng=substream(seed, "pff_diffusion", n),
            )
            parts = ens.particles
            summary = estimate_prior(ens)
            std_err = np.sqrt(np.diag(summary.cov) / n_part)
            ratio = np.abs(summary.mean - kf_means[n]) / np.maximum(std_err, 1e-12)
            assert ratio.max() <= 3.0


def _simulated_observations(model, count):
    from driftbench.statespace import simulate

    traj = simulate(model, State(3.0, 0.5), count, seed=7)
    return [r.observation for r in traj.records]
