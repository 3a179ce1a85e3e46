"""Tests for the area-level model densities and gradients."""

import math

import numpy as np
import pytest
from scipy import integrate, optimize, stats
from scipy.special import expit

from saesmooth.errors import ValidationError
from saesmooth.graph import build_graph, icar_precision, scale_icar
from saesmooth.model import (
    ModelConfig,
    ModelData,
    ParameterState,
    PosteriorDensity,
    chi2_variance_logpdf,
    constrain_spatial,
    grad_log_posterior,
    gvf_mean,
    latent_proportions,
    log_posterior,
    model_config_from_dict,
    pc_rate,
    simulate_from_prior,
)
from saesmooth.survey import DirectEstimates


def make_direct(rng, a_count, dof=7, n=80):
    areas = tuple(f"a{i}" for i in range(a_count))
    return DirectEstimates(
        areas=areas,
        p_hat=rng.uniform(0.15, 0.85, a_count),
        v_hat=rng.uniform(0.004, 0.03, a_count),
        dof=np.full(a_count, dof, dtype=np.int64),
        n=np.full(a_count, n, dtype=np.int64),
        m=np.full(a_count, dof + 1, dtype=np.int64),
        sampled=np.ones(a_count, dtype=bool),
        has_variance=np.ones(a_count, dtype=bool),
    )


def make_qstar(a_count, extra=()):
    areas = [f"a{i}" for i in range(a_count)]
    edges = [(f"a{i}", f"a{i+1}") for i in range(a_count - 1)] + list(extra)
    return scale_icar(icar_precision(build_graph(edges, areas)))


def make_density(rng, a_count=6, spatial=True, js=True, n_covariates=1, **cfg_kw):
    x = np.column_stack(
        [np.ones(a_count)] + [rng.normal(size=a_count) for _ in range(n_covariates)]
    )
    cfg = ModelConfig(
        design_matrix=x, spatial=spatial, smooth_variance=js, **cfg_kw
    )
    data = ModelData(
        direct=make_direct(rng, a_count),
        q_star=make_qstar(a_count) if spatial else None,
    )
    return PosteriorDensity(cfg, data)


def random_state_vector(rng, den, scale=0.4):
    # the variance block is standardized, so a plain draw keeps every
    # likelihood term in range
    return rng.normal(0.0, scale, den.dim)


class TestPcRate:
    def test_closed_form(self):
        assert pc_rate(1.0, 0.01) == pytest.approx(-math.log(0.01), rel=1e-15)
        assert pc_rate(1.0, 0.01) == pytest.approx(4.605170185988091)

    def test_tail_probability(self):
        lam = pc_rate(2.5, 0.05)
        assert math.exp(-lam * 2.5) == pytest.approx(0.05, rel=1e-12)

    def test_bad_arguments(self):
        with pytest.raises(ValidationError):
            pc_rate(0.0, 0.01)
        with pytest.raises(ValidationError):
            pc_rate(1.0, 1.5)


class TestGvfMean:
    def test_binomial_variance_case(self):
        got = gvf_mean(0.5, 100, (0.0, 1.0, -1.0))
        assert got == pytest.approx(math.log(0.25 / 100), rel=1e-12)

    def test_constant_when_slopes_zero(self):
        for p, n in [(0.1, 5), (0.9, 5000)]:
            assert gvf_mean(p, n, (2.5, 0.0, 0.0)) == pytest.approx(2.5)

    def test_symmetry_in_p(self):
        g = (0.3, 1.4, -0.7)
        assert gvf_mean(0.2, 50, g) == pytest.approx(gvf_mean(0.8, 50, g), rel=1e-14)

    def test_domain_error_on_boundary(self):
        for p in (0.0, 1.0):
            with pytest.raises(ValidationError, match="inside"):
                gvf_mean(p, 10, (0.0, 1.0, -1.0))

    def test_extra_covariates(self):
        base = gvf_mean(0.4, 30, (0.1, 1.0, -1.0))
        got = gvf_mean(0.4, 30, (0.1, 1.0, -1.0, 2.0), z=[0.5])
        assert got == pytest.approx(base + 1.0, rel=1e-12)

    def test_extras_without_z_rejected(self):
        with pytest.raises(ValidationError, match="extra"):
            gvf_mean(0.4, 30, (0.1, 1.0, -1.0, 2.0))


class TestConstrainSpatial:
    def test_already_centered(self):
        np.testing.assert_allclose(constrain_spatial([1.0, -1.0]), [1.0, -1.0])

    def test_mean_subtraction(self):
        np.testing.assert_allclose(constrain_spatial([2.0, 0.0]), [1.0, -1.0])

    def test_sum_zero(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            u = rng.normal(size=rng.integers(2, 40))
            assert abs(constrain_spatial(u).sum()) < 1e-12 * len(u)


class TestChi2VarianceDensity:
    def test_matches_scipy_oracle(self):
        # Independent route: density of v_hat when d*v_hat/V ~ chi2(d).
        for d in (1, 5, 20):
            for v in (0.3, 1.7):
                grid = np.linspace(0.01, 5.0, 40)
                ours = chi2_variance_logpdf(grid, v, d)
                oracle = stats.chi2.logpdf(d * grid / v, d) + np.log(d / v)
                np.testing.assert_allclose(ours, oracle, rtol=1e-12)

    @pytest.mark.parametrize("d", [1, 5, 20])
    def test_normalizes_to_one(self, d):
        v = 0.37
        val, err = integrate.quad(
            lambda vh: math.exp(chi2_variance_logpdf(vh, v, d)), 0.0, np.inf
        )
        assert val == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("d", [1, 5, 20])
    def test_mean_is_v(self, d):
        # E[v_hat | V] = V: unbiasedness the linking model presumes.
        rng = np.random.default_rng(99 + d)
        v = 0.52
        draws = v * rng.chisquare(d, size=100_000) / d
        assert draws.mean() == pytest.approx(v, rel=0.01)


class TestLatentProportions:
    def test_zero_state_gives_half(self):
        rng = np.random.default_rng(1)
        den = make_density(rng, spatial=False, js=False, n_covariates=0)
        a_count = den.config.n_areas
        state = ParameterState(
            beta=np.zeros(1), u_unstr=np.zeros(a_count), log_sigma_u=0.0
        )
        p = latent_proportions(state, den.config, den.data)
        np.testing.assert_allclose(p, 0.5, atol=1e-15)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(2)
        den = make_density(rng, spatial=True, js=False, n_covariates=2)
        a_count = den.config.n_areas
        state = ParameterState(
            beta=rng.normal(size=3),
            u_unstr=rng.normal(size=a_count),
            log_sigma_u=-0.4,
            u_spat=rng.normal(size=a_count),
            logit_phi=0.7,
        )
        p = latent_proportions(state, den.config, den.data)
        sigma = math.exp(-0.4)
        phi = 1 / (1 + math.exp(-0.7))
        for a in range(a_count):
            eta = float(den.config.design_matrix[a] @ state.beta)
            eta += sigma * (
                math.sqrt(1 - phi) * state.u_unstr[a]
                + math.sqrt(phi) * state.u_spat[a]
            )
            assert p[a] == pytest.approx(1 / (1 + math.exp(-eta)), rel=1e-12)

    def test_phi_zero_limit_matches_iid(self):
        rng = np.random.default_rng(3)
        den_sp = make_density(rng, spatial=True, js=False)
        rng2 = np.random.default_rng(3)
        den_iid = make_density(rng2, spatial=False, js=False)
        a_count = den_sp.config.n_areas
        common = dict(
            beta=np.array([0.3, -0.2]),
            u_unstr=np.linspace(-1, 1, a_count),
            log_sigma_u=-0.1,
        )
        p_sp = latent_proportions(
            ParameterState(
                u_spat=np.linspace(1, -1, a_count), logit_phi=-40.0, **common
            ),
            den_sp.config,
            den_sp.data,
        )
        p_iid = latent_proportions(
            ParameterState(**common), den_iid.config, den_iid.data
        )
        np.testing.assert_allclose(p_sp, p_iid, atol=1e-8)


class TestBym2Covariance:
    def test_phi_zero_identity(self):
        # Sigma(sigma^2, phi) = sigma^2((1-phi) I + phi Qstar^-); at phi = 0
        # this is sigma^2 I.
        qs = make_qstar(7)
        sigma2 = 1.3**2
        phi = 0.0
        cov = sigma2 * ((1 - phi) * np.eye(7) + phi * qs.generalized_inverse())
        np.testing.assert_allclose(cov, sigma2 * np.eye(7), atol=1e-8)

    def test_mixture_covariance_against_draws(self):
        # u = sigma(sqrt(1-phi) u1 + sqrt(phi) u2*) should have covariance
        # sigma^2((1-phi) I + phi Qstar^-).
        from saesmooth.graph import sample_icar

        qs = make_qstar(5)
        rng = np.random.default_rng(8)
        sigma, phi = 0.9, 0.35
        n = 200_000
        u1 = rng.standard_normal((n, 5))
        u2 = sample_icar(qs, rng, size=n)
        u = sigma * (math.sqrt(1 - phi) * u1 + math.sqrt(phi) * u2)
        target = sigma**2 * ((1 - phi) * np.eye(5) + phi * qs.generalized_inverse())
        np.testing.assert_allclose(np.cov(u, rowvar=False), target, atol=0.02)


class TestLogPosteriorOracles:
    def test_two_area_ms_iid_term_by_term(self):
        # Every term recomputed with scipy densities.
        areas = ("a0", "a1")
        direct = DirectEstimates(
            areas=areas,
            p_hat=np.array([0.3, 0.6]),
            v_hat=np.array([0.01, 0.02]),
            dof=np.array([7, 7]),
            n=np.array([20, 25]),
            m=np.array([8, 8]),
            sampled=np.ones(2, bool),
            has_variance=np.ones(2, bool),
        )
        cfg = ModelConfig(
            design_matrix=np.ones((2, 1)), spatial=False, smooth_variance=False
        )
        state = ParameterState(
            beta=np.array([0.2]),
            u_unstr=np.array([0.5, -0.3]),
            log_sigma_u=-0.5,
        )
        got = log_posterior(state, cfg, ModelData(direct=direct))

        sigma = math.exp(-0.5)
        p = expit(0.2 + sigma * state.u_unstr)
        lam = -math.log(0.01)
        expected = (
            stats.norm.logpdf(direct.p_hat, p, np.sqrt(direct.v_hat)).sum()
            + stats.norm.logpdf(state.u_unstr, 0, 1).sum()
            + stats.norm.logpdf(0.2, 0, math.sqrt(1000.0))
            + (math.log(lam) - lam * sigma + (-0.5))
        )
        assert got == pytest.approx(expected, rel=1e-12)

    def test_js_minus_ms_is_variance_terms(self):
        rng = np.random.default_rng(4)
        a_count = 5
        direct = make_direct(rng, a_count)
        x = np.column_stack([np.ones(a_count), rng.normal(size=a_count)])
        qs = make_qstar(a_count)
        cfg_ms = ModelConfig(design_matrix=x, spatial=True, smooth_variance=False)
        cfg_js = ModelConfig(design_matrix=x, spatial=True, smooth_variance=True)
        data = ModelData(direct=direct, q_star=qs)

        common = dict(
            beta=rng.normal(size=2),
            u_unstr=rng.normal(size=a_count),
            log_sigma_u=-0.3,
            u_spat=rng.normal(size=a_count),
            logit_phi=0.4,
        )
        gamma = np.array([0.3, 1.2, -0.8])
        log_sigma_tau = -0.2
        state_ms = ParameterState(**common)
        state_js = ParameterState(
            log_v=np.log(direct.v_hat),
            gamma=gamma,
            log_sigma_tau=log_sigma_tau,
            **common,
        )
        lp_ms = log_posterior(state_ms, cfg_ms, data)
        lp_js = log_posterior(state_js, cfg_js, data)

        p = latent_proportions(state_ms, cfg_ms, data)
        sigma_tau = math.exp(log_sigma_tau)
        lam = -math.log(0.01)
        d = direct.dof.astype(float)
        chi_terms = (
            stats.chi2.logpdf(d * direct.v_hat / direct.v_hat, d)
            + np.log(d / direct.v_hat)
        ).sum()
        # the variance block is sampled standardized, so the linking normal
        # appears as a unit-Gaussian prior on z = (log V - f) / sigma_tau
        f = gvf_mean(p, direct.n, gamma)
        z = (np.log(direct.v_hat) - f) / sigma_tau
        z_prior = stats.norm.logpdf(z).sum()
        gamma_prior = stats.norm.logpdf(gamma, [0, 1, -1], [1, 0.5, 0.5]).sum()
        tau_prior = math.log(lam) - lam * sigma_tau + log_sigma_tau
        expected_diff = chi_terms + z_prior + gamma_prior + tau_prior
        assert lp_js - lp_ms == pytest.approx(expected_diff, rel=1e-12)

    def test_pc_prior_contribution(self):
        # Difference of log posteriors at two sigma_u values isolates the
        # PC prior plus the parts that depend on sigma_u through u.
        rng = np.random.default_rng(5)
        den = make_density(rng, spatial=False, js=False)
        a_count = den.config.n_areas
        zero_u = np.zeros(a_count)
        lam = -math.log(0.01)
        lp = []
        for ls in (-0.7, 0.4):
            state = ParameterState(
                beta=np.array([0.1, 0.0]), u_unstr=zero_u, log_sigma_u=ls
            )
            lp.append(log_posterior(state, den.config, den.data))
        # with u identically zero, only the PC prior (with Jacobian) moves
        expected = (math.log(lam) - lam * math.exp(0.4) + 0.4) - (
            math.log(lam) - lam * math.exp(-0.7) + (-0.7)
        )
        assert lp[1] - lp[0] == pytest.approx(expected, rel=1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(6)
        a_count = 6
        direct = make_direct(rng, a_count)
        x = np.column_stack([np.ones(a_count), rng.normal(size=a_count)])
        g = build_graph(
            [(f"a{i}", f"a{i+1}") for i in range(a_count - 1)] + [("a0", "a3")],
            [f"a{i}" for i in range(a_count)],
        )
        q = icar_precision(g)
        perm = np.array([4, 2, 0, 5, 1, 3])

        def lp_for(order):
            qs = scale_icar(q[np.ix_(order, order)])
            d = DirectEstimates(
                areas=tuple(direct.areas[i] for i in order),
                p_hat=direct.p_hat[order],
                v_hat=direct.v_hat[order],
                dof=direct.dof[order],
                n=direct.n[order],
                m=direct.m[order],
                sampled=direct.sampled[order],
                has_variance=direct.has_variance[order],
            )
            cfg = ModelConfig(
                design_matrix=x[order], spatial=True, smooth_variance=True
            )
            state = ParameterState(
                beta=np.array([0.2, -0.1]),
                u_unstr=u1[order],
                log_sigma_u=-0.4,
                u_spat=u2[order],
                logit_phi=0.3,
                log_v=lv[order],
                gamma=np.array([0.1, 1.1, -0.9]),
                log_sigma_tau=-0.6,
            )
            return log_posterior(state, cfg, ModelData(direct=d, q_star=qs))

        u1 = rng.normal(size=a_count)
        u2 = rng.normal(size=a_count)
        lv = np.log(direct.v_hat) + rng.normal(0, 0.2, a_count)
        identity = np.arange(a_count)
        assert lp_for(perm) == pytest.approx(lp_for(identity), rel=1e-10)

    def test_js_concave_in_log_v_near_max(self):
        # profile one area's log V through the state interface (the packed
        # chart is affine in log V, so concavity carries over exactly)
        rng = np.random.default_rng(7)
        den = make_density(rng, a_count=4, spatial=True, js=True)
        base = den.unpack(random_state_vector(rng, den))

        def f(val):
            lv = base.log_v.copy()
            lv[0] = val
            state = ParameterState(
                beta=base.beta,
                u_unstr=base.u_unstr,
                log_sigma_u=base.log_sigma_u,
                u_spat=base.u_spat,
                logit_phi=base.logit_phi,
                log_v=lv,
                gamma=base.gamma,
                log_sigma_tau=base.log_sigma_tau,
            )
            return den.value_and_grad(den.pack(state))[0]

        grid = np.linspace(-8.0, 2.0, 400)
        vals = np.array([f(v) for v in grid])
        k = int(np.argmax(vals))
        assert 0 < k < len(grid) - 1
        window = vals[max(0, k - 8) : k + 9]
        second = np.diff(window, 2)
        assert np.all(second < 0)


class TestGradient:
    @pytest.mark.parametrize(
        "spatial,js",
        [(False, False), (False, True), (True, False), (True, True)],
        ids=["ms-iid", "js-iid", "ms-spatial", "js-spatial"],
    )
    def test_matches_central_differences(self, spatial, js):
        rng = np.random.default_rng(10)
        den = make_density(rng, a_count=6, spatial=spatial, js=js, n_covariates=1)
        for _ in range(25):
            x = random_state_vector(rng, den)
            _, grad = den.value_and_grad(x)
            fd = np.empty_like(x)
            for i in range(den.dim):
                h = 1e-5 * max(1.0, abs(x[i]))
                xp = x.copy()
                xp[i] += h
                xm = x.copy()
                xm[i] -= h
                fd[i] = (den.value_and_grad(xp)[0] - den.value_and_grad(xm)[0]) / (
                    2 * h
                )
            np.testing.assert_allclose(
                grad, fd, rtol=0, atol=1e-5 * np.maximum(1.0, np.abs(grad)).max()
            )

    def test_beta_prior_block(self):
        # With a flat likelihood contribution removed (all areas inactive),
        # the beta gradient reduces to -beta/1000.
        rng = np.random.default_rng(11)
        areas = ("a0", "a1", "a2")
        direct = DirectEstimates(
            areas=areas,
            p_hat=np.full(3, np.nan),
            v_hat=np.full(3, np.nan),
            dof=np.zeros(3, dtype=np.int64),
            n=np.zeros(3, dtype=np.int64),
            m=np.zeros(3, dtype=np.int64),
            sampled=np.zeros(3, dtype=bool),
            has_variance=np.zeros(3, dtype=bool),
        )
        cfg = ModelConfig(
            design_matrix=np.column_stack([np.ones(3), rng.normal(size=3)]),
            spatial=False,
            smooth_variance=False,
        )
        state = ParameterState(
            beta=np.array([3.0, -2.0]), u_unstr=np.zeros(3), log_sigma_u=0.0
        )
        grad = grad_log_posterior(state, cfg, ModelData(direct=direct))
        np.testing.assert_allclose(grad[:2], -state.beta / 1000.0, rtol=1e-12)

    @pytest.mark.parametrize("js", [False, True], ids=["ms", "js"])
    def test_stationary_point_after_ascent(self, js):
        # the density falls off in every direction of the sampling chart
        # (standardized variance block included), so ascent must reach an
        # interior point with vanishing gradient
        rng = np.random.default_rng(12)
        den = make_density(rng, a_count=5, spatial=True, js=js)

        def negative(x):
            lp, g = den.value_and_grad(x)
            return -lp, -g

        x0 = random_state_vector(rng, den, scale=0.1)
        res = optimize.minimize(
            negative,
            x0,
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": 20000, "ftol": 1e-18, "gtol": 1e-12},
        )
        _, grad = den.value_and_grad(res.x)
        assert np.linalg.norm(grad) < 1e-6


class TestStateAndConfig:
    def test_state_centers_u_spat(self):
        s = ParameterState(
            beta=np.zeros(1),
            u_unstr=np.zeros(3),
            log_sigma_u=0.0,
            u_spat=np.array([2.0, 1.0, 0.0]),
            logit_phi=0.0,
        )
        assert abs(s.u_spat.sum()) < 1e-12

    def test_state_rejects_nonfinite(self):
        with pytest.raises(ValidationError, match="finite"):
            ParameterState(
                beta=np.array([np.inf]), u_unstr=np.zeros(2), log_sigma_u=0.0
            )

    def test_pack_unpack_round_trip(self):
        rng = np.random.default_rng(13)
        den = make_density(rng, a_count=5, spatial=True, js=True)
        x = random_state_vector(rng, den)
        state = den.unpack(x)
        x2 = den.pack(state)
        # centering u_spat is idempotent up to the mean shift
        state2 = den.unpack(x2)
        np.testing.assert_allclose(state2.beta, state.beta)
        np.testing.assert_allclose(state2.log_v, state.log_v)
        np.testing.assert_allclose(
            state2.u_spat, state.u_spat - state.u_spat.mean(), atol=1e-14
        )

    def test_parameter_names_layout(self):
        rng = np.random.default_rng(14)
        den = make_density(rng, a_count=3, spatial=True, js=True, n_covariates=0)
        names = den.parameter_names
        assert names[0] == "beta[0]"
        assert names[1] == "u_unstr[a0]"
        assert "logit_phi" in names
        assert "z_v[a0]" in names
        assert names[-1] == "log_sigma_tau"
        assert len(names) == den.dim
        assert den.dim == 1 + 3 + 3 + 2 + 3 + 3 + 1

    def test_config_requires_intercept_column(self):
        with pytest.raises(ValidationError, match="ones"):
            ModelConfig(design_matrix=np.arange(6.0).reshape(3, 2))

    def test_config_rejects_rank_deficient(self):
        x = np.ones((4, 2))
        with pytest.raises(ValidationError, match="rank"):
            ModelConfig(design_matrix=x)

    def test_config_from_dict_unknown_key(self):
        with pytest.raises(ValidationError, match="unknown model config key"):
            model_config_from_dict({"spatal": True}, np.ones((3, 1)))

    def test_config_from_dict_type_errors(self):
        with pytest.raises(ValidationError, match="true or false"):
            model_config_from_dict({"spatial": "yes"}, np.ones((3, 1)))
        with pytest.raises(ValidationError, match="pair"):
            model_config_from_dict({"pc_prior_u": [1.0]}, np.ones((3, 1)))

    def test_config_from_dict_round_trip(self):
        cfg = model_config_from_dict(
            {"spatial": False, "smooth_variance": False, "interval_level": 0.8},
            np.ones((3, 1)),
        )
        assert cfg.method_label == "Unmatched MS"
        assert cfg.interval_level == 0.8

    def test_method_labels(self):
        x = np.ones((3, 1))
        labels = {
            (False, False): "Unmatched MS",
            (False, True): "Unmatched JS",
            (True, False): "Spatial Unmatched MS",
            (True, True): "Spatial Unmatched JS",
        }
        for (sp, js), label in labels.items():
            assert (
                ModelConfig(design_matrix=x, spatial=sp, smooth_variance=js).method_label
                == label
            )


class TestExclusionPolicy:
    def make_degenerate(self):
        areas = ("a0", "a1", "a2", "a3")
        return DirectEstimates(
            areas=areas,
            p_hat=np.array([0.4, 0.0, 0.5, np.nan]),
            v_hat=np.array([0.01, 0.0, 0.02, np.nan]),
            dof=np.array([7, 7, 7, 0]),
            n=np.array([50, 50, 50, 0]),
            m=np.array([8, 8, 8, 0]),
            sampled=np.array([True, True, True, False]),
            has_variance=np.array([True, True, True, False]),
        )

    def test_degenerate_area_excluded_with_warning(self):
        direct = self.make_degenerate()
        cfg = ModelConfig(
            design_matrix=np.ones((4, 1)), spatial=False, smooth_variance=True
        )
        with pytest.warns(UserWarning, match="excluded"):
            den = PosteriorDensity(cfg, ModelData(direct=direct))
        np.testing.assert_array_equal(den.active_idx, [0, 2])
        # the variance block covers only active areas
        assert sum(n.startswith("z_v") for n in den.parameter_names) == 2

    def test_js_with_no_usable_area_rejected(self):
        direct = self.make_degenerate()
        bad = DirectEstimates(
            areas=direct.areas[:2],
            p_hat=np.array([0.0, 1.0]),
            v_hat=np.array([0.0, 0.0]),
            dof=np.array([7, 7]),
            n=np.array([50, 50]),
            m=np.array([8, 8]),
            sampled=np.ones(2, bool),
            has_variance=np.ones(2, bool),
        )
        cfg = ModelConfig(
            design_matrix=np.ones((2, 1)), spatial=False, smooth_variance=True
        )
        with pytest.warns(UserWarning, match="excluded"):
            with pytest.raises(ValidationError, match="at least one area"):
                PosteriorDensity(cfg, ModelData(direct=bad))

    def test_spatial_requires_qstar(self):
        rng = np.random.default_rng(15)
        cfg = ModelConfig(design_matrix=np.ones((4, 1)), spatial=True)
        with pytest.raises(ValidationError, match="q_star"):
            PosteriorDensity(cfg, ModelData(direct=make_direct(rng, 4)))


class TestSimulateFromPrior:
    def test_reproducible_and_consistent(self):
        cfg = ModelConfig(
            design_matrix=np.ones((6, 1)),
            spatial=True,
            smooth_variance=True,
            beta_prior_sd=1.0,
        )
        qs = make_qstar(6)
        n = np.full(6, 60)
        dof = np.full(6, 9)
        x1, d1, den1 = simulate_from_prior(
            cfg, n_units=n, dof=dof, q_star=qs, rng=np.random.default_rng(42)
        )
        x2, d2, _ = simulate_from_prior(
            cfg, n_units=n, dof=dof, q_star=qs, rng=np.random.default_rng(42)
        )
        np.testing.assert_array_equal(x1, x2)
        np.testing.assert_array_equal(d1.p_hat, d2.p_hat)
        assert x1.shape == (den1.dim,)
        lp, _ = den1.value_and_grad(x1)
        assert np.isfinite(lp)

    def test_ms_needs_v_true(self):
        cfg = ModelConfig(
            design_matrix=np.ones((3, 1)), spatial=False, smooth_variance=False
        )
        with pytest.raises(ValidationError, match="v_true"):
            simulate_from_prior(
                cfg,
                n_units=np.full(3, 10),
                dof=np.full(3, 5),
                rng=np.random.default_rng(0),
            )
