"""Synthetic data generator mirroring the misaligned exposure/outcome design.

Daily-resolution draws of a separable spatial-temporal Gaussian process with
a periodic-kernel temporal mean, aggregated to monthly site averages with
missingness, plus quarterly Voronoi block designs and block-level outcomes
drawn jointly with the latent process.
"""

from dataclasses import dataclass, field

import numpy as np

from .covariance import (
    ProcessParams,
    SpaceTimeBlock,
    SpaceTimePoint,
    cov_block_block,
    cov_point_block,
    cov_point_point,
    draw_block_samples,
    exp_time_corr,
    matern_corr,
)
from .geometry import BoundingBox, pairwise_distances, polygon_area, voronoi_blocks
from .linalg import cholesky_jittered, chol_solve, psd_factor, tri_solve
from .model import BasisSpec, BlockOutcomeDataset, PointDataset

N_MONTHS = 12
# §-style default: four quarters with irregular Voronoi block counts
DEFAULT_QUARTERS = ((40, (0.0, 3.0)), (50, (3.0, 6.0)), (30, (6.0, 9.0)), (60, (9.0, 12.0)))


@dataclass(frozen=True)
class SimConfig:
    """Design of one synthetic misaligned dataset."""

    n_sites: int = 100
    n_times: int = 360
    box: BoundingBox = None
    time_span: tuple = (0.0, 12.0)
    params: ProcessParams = ProcessParams(phi_s=4.0, nu=0.5, phi_t=0.6)
    noise_var: float = 1.0
    mean_level: float = 5.0
    mean_var: float = 4.0
    mean_period: float = 7.0
    mean_decay: float = 0.1
    missing_frac: float = 0.1
    seed: int = 0
    beta1: tuple = (5.0, 1.0)
    beta2: float = -1.0
    tau2: float = 5.0
    quarters: tuple = DEFAULT_QUARTERS

    def __post_init__(self):
        if self.box is None:
            object.__setattr__(self, "box", BoundingBox(np.zeros(2), np.ones(2)))
        if self.n_sites < 1 or self.n_times < 1:
            raise ValueError("n_sites and n_times must be >= 1")
        if not 0.0 <= self.missing_frac < 1.0:
            raise ValueError(f"missing_frac must be in [0, 1), got {self.missing_frac}")
        if self.noise_var < 0 or self.mean_var < 0 or self.tau2 < 0:
            raise ValueError("variances must be nonnegative")
        a, b = self.time_span
        if not a < b:
            raise ValueError(f"time span must be increasing, got {self.time_span}")
        object.__setattr__(self, "time_span", (float(a), float(b)))
        object.__setattr__(self, "beta1", tuple(float(v) for v in self.beta1))
        object.__setattr__(self, "quarters",
                           tuple((int(c), (float(lo), float(hi))) for c, (lo, hi) in self.quarters))


@dataclass
class SimTruth:
    """Ground truth retained for scoring: latent fields and generator parameters."""

    sites: np.ndarray                 # (n_s, 2)
    times: np.ndarray                 # (n_t,)
    mean_curve: np.ndarray            # (n_t,)
    latent: np.ndarray                # (n_s, n_t), detrended daily field
    monthly_points: tuple             # all site-month coordinates, no missingness
    monthly_latent: np.ndarray        # latent monthly truth incl. trend
    monthly_detrended: np.ndarray
    observed_mask: np.ndarray         # which monthly records survived missingness
    params: ProcessParams
    block_values: np.ndarray = None       # set by simulate_outcome
    block_detrended: np.ndarray = None
    outcome_params: dict = field(default_factory=dict)

    def daily_value(self, site_index: int, time_index: int) -> float:
        return float(self.mean_curve[time_index] + self.latent[site_index, time_index])


def periodic_kernel(t, t_other, period: float, decay: float):
    """Periodic correlation exp(-2 decay^2 sin^2(pi |t - t'| / period))."""
    lag = np.abs(np.asarray(t, dtype=float) - np.asarray(t_other, dtype=float))
    out = np.exp(-2.0 * decay**2 * np.sin(np.pi * lag / period) ** 2)
    if out.ndim == 0:
        return float(out)
    return out


def _month_edges(span) -> np.ndarray:
    return np.linspace(span[0], span[1], N_MONTHS + 1)


def simulate_exposure(cfg: SimConfig, rng: np.random.Generator,
                      basis_spec: BasisSpec = None):
    """Simulate daily exposure data, aggregate to monthly site records.

    The daily field is drawn on the site-by-time grid through the Kronecker
    structure chol(C_s) G chol(C_t)^T (O(n_s^3 + n_t^3) instead of the dense
    joint factorization), unit process variance, plus a random periodic-GP
    mean curve and white measurement noise. Monthly averages per site are
    computed and a fraction of records is removed uniformly at random.

    Returns (PointDataset, SimTruth); the dataset holds only observed rows.
    """
    if basis_spec is None:
        basis_spec = BasisSpec("monthly")
    span = cfg.time_span
    sites = cfg.box.lo + rng.random((cfg.n_sites, 2)) * (cfg.box.hi - cfg.box.lo)
    dt = (span[1] - span[0]) / cfg.n_times
    times = span[0] + (np.arange(cfg.n_times) + 0.5) * dt

    if cfg.mean_var > 0:
        corr_mean = periodic_kernel(times[:, None], times[None, :],
                                    cfg.mean_period, cfg.mean_decay)
        chol_mean, _ = cholesky_jittered(cfg.mean_var * corr_mean)
        mean_curve = cfg.mean_level + chol_mean.lower @ rng.standard_normal(cfg.n_times)
    else:
        mean_curve = np.full(cfg.n_times, cfg.mean_level)
        rng.standard_normal(cfg.n_times)        # keep the stream layout fixed

    c_s = matern_corr(pairwise_distances(sites), cfg.params.phi_s, cfg.params.nu)
    c_t = exp_time_corr(times[:, None], times[None, :], cfg.params.phi_t)
    chol_s, _ = cholesky_jittered(c_s)
    chol_t, _ = cholesky_jittered(c_t)
    latent = chol_s.lower @ rng.standard_normal((cfg.n_sites, cfg.n_times)) @ chol_t.lower.T
    daily = mean_curve[None, :] + latent \
        + np.sqrt(cfg.noise_var) * rng.standard_normal((cfg.n_sites, cfg.n_times))

    edges = _month_edges(span)
    points, values, latents, detrended = [], [], [], []
    for i in range(cfg.n_sites):
        for m in range(N_MONTHS):
            in_month = (times >= edges[m]) & (times < edges[m + 1])
            if not np.any(in_month):
                continue
            points.append(SpaceTimePoint(sites[i], (edges[m], edges[m + 1])))
            values.append(daily[i, in_month].mean())
            latents.append(mean_curve[in_month].mean() + latent[i, in_month].mean())
            detrended.append(latent[i, in_month].mean())
    values = np.asarray(values)
    n_full = len(points)

    n_drop = int(round(cfg.missing_frac * n_full))
    observed_mask = np.ones(n_full, dtype=bool)
    if n_drop:
        observed_mask[rng.choice(n_full, size=n_drop, replace=False)] = False

    dataset = PointDataset(
        points=tuple(p for p, keep in zip(points, observed_mask) if keep),
        x=values[observed_mask], basis_spec=basis_spec)
    truth = SimTruth(
        sites=sites, times=times, mean_curve=mean_curve, latent=latent,
        monthly_points=tuple(points), monthly_latent=np.asarray(latents),
        monthly_detrended=np.asarray(detrended), observed_mask=observed_mask,
        params=cfg.params)
    return dataset, truth


def simulate_block_design(quarters, box: BoundingBox, rng: np.random.Generator):
    """Voronoi block design: per (count, interval) quarter, that many cells.

    Cells come from uniformly sampled seeds and partition the box; every cell
    is paired with its quarter's interval.
    """
    blocks = []
    for count, interval in quarters:
        if count < 1:
            raise ValueError(f"block count must be >= 1, got {count}")
        seeds = box.lo + rng.random((int(count), 2)) * (box.hi - box.lo)
        for cell in voronoi_blocks(seeds, box):
            blocks.append(SpaceTimeBlock(cell, tuple(interval)))
    return blocks


def simulate_outcome(blocks, truth: SimTruth, beta1, beta2: float, tau2: float,
                     rng: np.random.Generator, mc_samples: int = 500) -> BlockOutcomeDataset:
    """Draw block-level latent averages jointly with the point truth, then outcomes.

    The detrended block averages are sampled from their exact conditional
    given all monthly latent truths (Monte Carlo integrated spatial kernels),
    the quarter-averaged mean curve is added back, and the outcome is
    y = W beta1 + beta2 Z_L + noise with variance tau2 / (|B| |I|).
    Fills `truth.block_values` for scoring.
    """
    beta1 = np.asarray(beta1, dtype=float)
    pts = truth.monthly_points
    params = truth.params
    chol_mm, _ = cholesky_jittered(cov_point_point(pts, params))
    primary, secondary = draw_block_samples(blocks, mc_samples, rng)
    cross = cov_point_block(pts, blocks, params, mc_samples, rng, samples=primary)
    c_bb = cov_block_block(blocks, params, mc_samples, rng,
                           samples=primary, samples2=secondary)
    half = tri_solve(chol_mm, cross)
    cond = c_bb - half.T @ half
    chol_cond = psd_factor(0.5 * (cond + cond.T))
    cond_mean = cross.T @ chol_solve(chol_mm, truth.monthly_detrended)
    z_detrended = cond_mean + chol_cond.lower @ rng.standard_normal(len(blocks))

    block_means = np.empty(len(blocks))
    for k, block in enumerate(blocks):
        lo, hi = block.interval
        in_interval = (truth.times >= lo) & (truth.times < hi)
        block_means[k] = truth.mean_curve[in_interval].mean()
    z_blocks = block_means + z_detrended

    k_n = len(blocks)
    design = np.column_stack([np.ones(k_n), rng.standard_normal(k_n)])
    if design.shape[1] != len(beta1):
        raise ValueError(f"beta1 must have length {design.shape[1]}, got {len(beta1)}")
    areas = np.array([polygon_area(b.region) for b in blocks])
    lengths = np.array([b.length for b in blocks])
    noise_sd = np.sqrt(tau2 / (areas * lengths))
    y = design @ beta1 + beta2 * z_blocks + noise_sd * rng.standard_normal(k_n)

    truth.block_values = z_blocks
    truth.block_detrended = z_detrended
    truth.outcome_params = {"beta1": beta1.tolist(), "beta2": float(beta2),
                            "tau2": float(tau2)}
    return BlockOutcomeDataset(blocks=tuple(blocks), y=y, w=design)
