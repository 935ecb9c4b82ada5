import numpy as np
import pytest

from gpstack.covariance import ProcessParams, SpaceTimePoint, cov_point_point
from gpstack.errors import TailTooSmallError
from gpstack.linalg import student_t_logpdf
from gpstack.loo import (
    GpdFit,
    LooMatrix,
    build_loo_matrix,
    exact_loo,
    exact_loo_logpdf,
    exact_loo_all,
    gpd_fit_tail,
    pareto_smooth_rows,
    psis_loo,
)
from gpstack.model import (
    BasisSpec,
    CandidateSpec,
    PointDataset,
    Priors,
    fit_candidate,
    sample_candidate,
)

from conftest import make_toy_dataset
from oracles import dense_loo_logpdf


class TestExactLoo:
    def test_two_point_scalar_oracle(self):
        # N=2 with a constant basis is small enough to hand-check via the
        # straight-line conjugate formulas
        pts = (SpaceTimePoint([0.0, 0.0], (0.0, 1.0)),
               SpaceTimePoint([0.3, 0.4], (0.0, 1.0)))
        x = np.array([0.8, -0.4])
        data = PointDataset(points=pts, x=x, basis_spec=BasisSpec("constant"))
        priors = Priors.default(1, 1)
        spec = CandidateSpec(ProcessParams(2.0, 0.5, 1.0), 0.5)
        fit = fit_candidate(data, spec, priors)

        cov = cov_point_point(pts, spec.params)
        v = cov + 0.5 * np.eye(2)
        # leave out j=0: scalar conjugate update on observation 1
        v11 = v[1, 1]
        mg_inv = 1.0 / v11 + 1e-3
        mg_vec = x[1] / v11
        gamma_hat = mg_vec / mg_inv
        r = v[1, 0]
        h = 1.0 - r / v11
        a_star = 2.0 + 0.5
        b_star = 0.1 + 0.5 * (x[1] ** 2 / v11 - mg_vec * gamma_hat)
        loc = r * x[1] / v11 + h * gamma_hat
        scale2 = (b_star / a_star) * (v[0, 0] - r**2 / v11 + h**2 / mg_inv)
        expected = student_t_logpdf(x[0], 2 * a_star, loc, np.sqrt(scale2))
        assert exact_loo_logpdf(fit, 0) == pytest.approx(expected, abs=1e-12)

    def test_duplicated_rows_share_density(self):
        p = SpaceTimePoint([0.5, 0.5], (2.0, 3.0))
        q = SpaceTimePoint([0.1, 0.9], (4.0, 5.0))
        data = PointDataset(points=(p, p, q), x=np.array([1.2, 1.2, -0.3]),
                            basis_spec=BasisSpec("constant"))
        spec = CandidateSpec(ProcessParams(2.0, 0.5, 1.0), 0.8)
        fit = fit_candidate(data, spec, Priors.default(1, 1))
        assert exact_loo(fit, 0) == pytest.approx(exact_loo(fit, 1), rel=1e-9)

    def test_rank_one_path_equals_refit(self, toy):
        data, spec, priors, _ = toy
        fit = fit_candidate(data, spec, priors)
        cov = cov_point_point(data.points, spec.params)
        d_tilde = 1.0 / data.interval_lengths
        for j in range(data.n):
            ref = dense_loo_logpdf(data.x, data.basis, cov, d_tilde, spec.delta2,
                                   priors, j)
            assert exact_loo_logpdf(fit, j) == pytest.approx(ref, abs=1e-8)

    def test_order_invariance(self, toy):
        data, spec, priors, _ = toy
        fit = fit_candidate(data, spec, priors)
        base = exact_loo_logpdf(fit, 0)
        rng = np.random.default_rng(1)
        perm = np.concatenate([[0], 1 + rng.permutation(data.n - 1)])
        data_p = PointDataset(points=tuple(data.points[i] for i in perm),
                              x=data.x[perm], basis_spec=data.basis_spec,
                              basis=data.basis[perm])
        fit_p = fit_candidate(data_p, spec, priors)
        assert exact_loo_logpdf(fit_p, 0) == pytest.approx(base, abs=1e-10)

    def test_single_observation_rejected(self):
        pts = (SpaceTimePoint([0.0, 0.0], (0.0, 1.0)),)
        data = PointDataset(points=pts, x=np.array([1.0]), basis_spec=BasisSpec("constant"))
        fit = fit_candidate(data, CandidateSpec(ProcessParams(1.0, 0.5, 1.0), 1.0),
                            Priors.default(1, 1))
        with pytest.raises(ValueError):
            exact_loo_logpdf(fit, 0)


class TestGpdFit:
    def test_recovers_positive_shape(self):
        rng = np.random.default_rng(0)
        errs_k, errs_s = [], []
        for _ in range(200):
            u = rng.random(2000)
            y = (1.0 / 0.5) * ((1 - u) ** (-0.5) - 1)     # GPD(k=0.5, sigma=1)
            f = gpd_fit_tail(y)
            errs_k.append(f.k - 0.5)
            errs_s.append(f.sigma - 1.0)
        assert abs(np.mean(errs_k)) < 0.05
        assert abs(np.mean(errs_s)) < 0.07

    def test_recovers_exponential_tail(self):
        rng = np.random.default_rng(1)
        errs = [gpd_fit_tail(rng.exponential(1.0, 2000)).k for _ in range(200)]
        assert abs(np.mean(errs)) < 0.05

    def test_too_few_points(self):
        with pytest.raises(TailTooSmallError):
            gpd_fit_tail([1.0, 2.0, 3.0])

    def test_constant_tail_degenerate(self):
        with pytest.raises(ValueError):
            gpd_fit_tail([2.0] * 50)

    def test_deterministic(self):
        y = np.random.default_rng(2).exponential(1.0, 500)
        f1, f2 = gpd_fit_tail(y), gpd_fit_tail(y)
        assert (f1.k, f1.sigma) == (f2.k, f2.sigma)

    def test_gpdfit_requires_positive_sigma(self):
        with pytest.raises(ValueError):
            GpdFit(0.3, -1.0)


class TestParetoSmoothRows:
    def test_weights_bounded_by_raw_max(self):
        rng = np.random.default_rng(3)
        lw = rng.normal(size=(20, 1000)) * 3.0
        log_smooth, khat = pareto_smooth_rows(lw)
        shift = lw.max(axis=1, keepdims=True)
        assert np.all(np.isfinite(log_smooth))
        assert np.all(log_smooth <= (lw - shift).max(axis=1, keepdims=True) + 1e-12)

    def test_smoothing_touches_only_tail(self):
        rng = np.random.default_rng(4)
        lw = rng.normal(size=(1, 400))
        tail_len = int(np.ceil(min(0.2 * 400, 3 * np.sqrt(400))))
        log_smooth, _ = pareto_smooth_rows(lw)
        raw = lw[0] - lw[0].max()
        changed = np.abs(log_smooth[0] - raw) > 1e-12
        assert changed.sum() <= tail_len
        order = np.argsort(raw)
        assert np.all(np.isin(np.where(changed)[0], order[-tail_len:]))


class TestPsisLoo:
    def test_matches_exact_on_toy(self, toy):
        data, spec, priors, _ = toy
        fit = fit_candidate(data, spec, priors)
        draws = sample_candidate(fit, 4000, np.random.default_rng(1001))
        exact = np.array([exact_loo_logpdf(fit, j) for j in range(data.n)])
        dens, khat = psis_loo(draws, data, spec.delta2)
        diff = np.abs(np.log(dens) - exact)
        assert np.mean(diff < 0.05) >= 0.95

    def test_noise_scaling_with_interval_length(self):
        # doubling |I| halves the observation-noise variance in the kernel
        site = np.array([0.5, 0.5])
        pts = (SpaceTimePoint(site, (0.0, 1.0)), SpaceTimePoint([0.1, 0.1], (0.0, 2.0)))
        data = PointDataset(points=pts, x=np.array([1.0, 1.0]),
                            basis_spec=BasisSpec("constant"))
        from gpstack.model import PosteriorDraws
        draws = PosteriorDraws(sigma2=np.full(200, 2.0), gamma=np.zeros((200, 1)),
                               z=np.zeros((200, 2)))
        dens, _ = psis_loo(draws, data, 1.0)
        # all draws identical -> density is the plain normal with that variance
        v1, v2 = 2.0 * 1.0 / 1.0, 2.0 * 1.0 / 2.0
        expected1 = np.exp(-0.5 * (np.log(2 * np.pi * v1) + 1.0 / v1))
        expected2 = np.exp(-0.5 * (np.log(2 * np.pi * v2) + 1.0 / v2))
        assert dens[0] == pytest.approx(expected1, rel=1e-10)
        assert dens[1] == pytest.approx(expected2, rel=1e-10)

    def test_flat_likelihood_equals_mixture(self):
        # enormous delta^2: weights are uniform, so PSIS equals the plain
        # posterior-predictive mixture average
        data, spec, priors, _ = make_toy_dataset(seed=3)
        huge = CandidateSpec(spec.params, 1e6)
        fit = fit_candidate(data, huge, priors)
        draws = sample_candidate(fit, 500, np.random.default_rng(5))
        dens, _ = psis_loo(draws, data, huge.delta2)
        noise_var = huge.delta2 * draws.sigma2[:, None] / data.interval_lengths[None, :]
        lik = np.exp(-0.5 * (np.log(2 * np.pi * noise_var)
                             + (data.x[None, :] - draws.z) ** 2 / noise_var))
        # sigma^2 still varies across draws, so weights are only nearly uniform
        assert np.allclose(dens, lik.mean(axis=0), rtol=0.03)

    def test_requires_enough_draws(self, toy):
        data, spec, priors, _ = toy
        fit = fit_candidate(data, spec, priors)
        draws = sample_candidate(fit, 50, np.random.default_rng(2))
        with pytest.raises(ValueError):
            psis_loo(draws, data, spec.delta2)


class TestBuildLooMatrix:
    def test_single_candidate(self, toy):
        data, spec, priors, _ = toy
        fit = fit_candidate(data, spec, priors)
        loo = build_loo_matrix([fit], method="exact")
        assert loo.densities.shape == (data.n, 1)
        assert np.all(loo.densities > 0)
        assert np.all(np.isfinite(loo.densities))

    def test_exact_vs_psis_columns_agree(self, toy):
        data, spec, priors, _ = toy
        fit = fit_candidate(data, spec, priors)
        draws = sample_candidate(fit, 4000, np.random.default_rng(7))
        loo_e = build_loo_matrix([fit], method="exact")
        loo_p = build_loo_matrix([fit], [draws], method="psis")
        dlog = np.abs(np.log(loo_e.densities) - np.log(loo_p.densities))
        assert np.median(dlog) < 0.05
        assert dlog.max() < 0.5

    def test_khat_shape_and_method_tags(self, toy):
        data, spec, priors, _ = toy
        fit = fit_candidate(data, spec, priors)
        draws = sample_candidate(fit, 500, np.random.default_rng(8))
        loo = build_loo_matrix([fit, fit], [draws, draws], method="psis")
        assert loo.methods == ("psis", "psis")
        assert loo.khat.shape == loo.densities.shape

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            LooMatrix(np.array([[1.0], [np.inf]]), ("exact",))
