import numpy as np
import pytest

from gpstack.covariance import ProcessParams, exp_time_corr, matern_corr
from gpstack.geometry import BoundingBox, polygon_area
from gpstack.simulation import (
    SimConfig,
    periodic_kernel,
    simulate_block_design,
    simulate_exposure,
    simulate_outcome,
)


class TestPeriodicKernel:
    def test_zero_lag(self):
        assert periodic_kernel(3.0, 3.0, 7.0, 0.1) == 1.0

    def test_full_period(self):
        assert periodic_kernel(0.0, 7.0, 7.0, 0.1) == pytest.approx(1.0, abs=1e-12)

    def test_half_period_plugin(self):
        got = periodic_kernel(0.0, 3.5, 7.0, 0.1)
        assert got == pytest.approx(np.exp(-0.02), abs=1e-12)


def small_cfg(**kwargs):
    defaults = dict(n_sites=12, n_times=48, params=ProcessParams(4.0, 0.5, 0.6),
                    seed=0, quarters=((3, (0.0, 3.0)), (3, (3.0, 6.0)),
                                      (2, (6.0, 9.0)), (2, (9.0, 12.0))))
    defaults.update(kwargs)
    return SimConfig(**defaults)


class TestSimulateExposure:
    def test_record_counts_with_missingness(self):
        cfg = small_cfg(missing_frac=0.1)
        data, truth = simulate_exposure(cfg, np.random.default_rng(0))
        n_full = 12 * cfg.n_sites
        assert len(truth.monthly_points) == n_full
        assert data.n == n_full - int(round(0.1 * n_full))

    def test_paper_scale_record_count(self):
        # n_s = 100, 12 months, 10% missing -> 1080 observed records
        cfg = small_cfg(n_sites=100, n_times=120, missing_frac=0.1)
        data, _ = simulate_exposure(cfg, np.random.default_rng(1))
        assert data.n == 1080

    def test_noise_free_zero_mean_variance_aggregation(self):
        cfg = small_cfg(noise_var=0.0, mean_var=0.0)
        data, truth = simulate_exposure(cfg, np.random.default_rng(2))
        # observed monthly values equal the aggregated latent truth exactly
        observed_truth = truth.monthly_latent[truth.observed_mask]
        assert np.allclose(data.x, observed_truth, atol=1e-12)

    def test_determinism(self):
        cfg = small_cfg()
        d1, t1 = simulate_exposure(cfg, np.random.default_rng(3))
        d2, t2 = simulate_exposure(cfg, np.random.default_rng(3))
        assert np.array_equal(d1.x, d2.x)
        assert np.array_equal(t1.latent, t2.latent)

    def test_kronecker_covariance_matches_target(self):
        # sample covariance at 3 fixed coordinates across replicates
        cfg = small_cfg(n_sites=5, n_times=6, noise_var=0.0, mean_var=0.0,
                        missing_frac=0.0)
        reps = 500
        rng = np.random.default_rng(4)
        vals = np.empty((reps, 3))
        coords = [(0, 0), (2, 3), (4, 5)]
        sites = times = None
        for r in range(reps):
            _, truth = simulate_exposure(cfg, np.random.default_rng(1000 + r))
            vals[r] = [truth.latent[i, l] for i, l in coords]
            sites, times = truth.sites, truth.times
        target = np.empty((3, 3))
        for a, (i, l) in enumerate(coords):
            for b, (i2, l2) in enumerate(coords):
                d = np.linalg.norm(sites[i] - sites[i2])
                target[a, b] = matern_corr(d, 4.0, 0.5) * exp_time_corr(times[l],
                                                                        times[l2], 0.6)
        emp = np.cov(vals.T)
        se = 4.0 / np.sqrt(reps)           # rough bound on covariance-entry noise
        assert np.all(np.abs(emp - target) < se)


class TestSimulateBlockDesign:
    def test_paper_design_block_count(self):
        quarters = ((40, (0.0, 3.0)), (50, (3.0, 6.0)), (30, (6.0, 9.0)),
                    (60, (9.0, 12.0)))
        blocks = simulate_block_design(quarters, BoundingBox([0, 0], [1, 1]),
                                       np.random.default_rng(5))
        assert len(blocks) == 180

    def test_single_seed_is_whole_box(self):
        blocks = simulate_block_design(((1, (0.0, 3.0)),), BoundingBox([0, 0], [1, 1]),
                                       np.random.default_rng(6))
        assert len(blocks) == 1
        assert polygon_area(blocks[0].region) == pytest.approx(1.0)
        assert blocks[0].interval == (0.0, 3.0)

    def test_areas_partition_per_quarter(self):
        quarters = ((7, (0.0, 6.0)), (5, (6.0, 12.0)))
        blocks = simulate_block_design(quarters, BoundingBox([0, 0], [1, 1]),
                                       np.random.default_rng(7))
        for interval in ((0.0, 6.0), (6.0, 12.0)):
            total = sum(polygon_area(b.region) for b in blocks if b.interval == interval)
            assert total == pytest.approx(1.0, abs=1e-9)


class TestSimulateOutcome:
    def test_noise_free_zero_slope(self):
        cfg = small_cfg()
        rng = np.random.default_rng(8)
        _, truth = simulate_exposure(cfg, rng)
        blocks = simulate_block_design(cfg.quarters, cfg.box, rng)
        outcome = simulate_outcome(blocks, truth, (5.0, 1.0), 0.0, 0.0, rng,
                                   mc_samples=100)
        assert np.allclose(outcome.y, outcome.w @ np.array([5.0, 1.0]), atol=1e-12)

    def test_block_count_and_truth_filled(self):
        cfg = small_cfg()
        rng = np.random.default_rng(9)
        _, truth = simulate_exposure(cfg, rng)
        blocks = simulate_block_design(cfg.quarters, cfg.box, rng)
        outcome = simulate_outcome(blocks, truth, cfg.beta1, cfg.beta2, cfg.tau2, rng,
                                   mc_samples=100)
        assert outcome.k == len(blocks) == 10
        assert truth.block_values.shape == (10,)
        assert truth.outcome_params["beta2"] == cfg.beta2

    def test_ols_recovery_at_small_noise(self):
        cfg = small_cfg(n_sites=20, n_times=96,
                        quarters=((15, (0.0, 3.0)), (15, (3.0, 6.0)),
                                  (15, (6.0, 9.0)), (15, (9.0, 12.0))))
        rng = np.random.default_rng(10)
        _, truth = simulate_exposure(cfg, rng)
        blocks = simulate_block_design(cfg.quarters, cfg.box, rng)
        beta_true = np.array([5.0, 1.0, -1.0])
        outcome = simulate_outcome(blocks, truth, beta_true[:2], beta_true[2], 0.01,
                                   rng, mc_samples=100)
        design = np.column_stack([outcome.w, truth.block_values])
        coef, *_ = np.linalg.lstsq(design, outcome.y, rcond=None)
        resid = outcome.y - design @ coef
        dof = len(outcome.y) - 3
        cov = np.linalg.inv(design.T @ design) * (resid @ resid / dof)
        se = np.sqrt(np.diag(cov))
        assert np.all(np.abs(coef - beta_true) < 2 * se + 1e-6)
