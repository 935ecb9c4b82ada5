"""Two-module hierarchical model for misaligned exposure and outcome data.

Module 2 is a conjugate spatial-temporal regression on point-referenced,
temporally aggregated covariate observations; posterior sampling is exact
composition sampling (no MCMC). Module 1 is a downstream heteroskedastic
linear regression of block-level outcomes on the latent block averages,
conditioned draw by draw so exposure uncertainty propagates fully. Outcome
data never feed back into the latent process (modular cut).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .covariance import (
    ProcessParams,
    cov_block_block,
    cov_instant,
    cov_point_block,
    cov_point_point,
    draw_block_samples,
    intervals_of,
)
from .errors import FitError, PredictionError, RegressionError
from .geometry import polygon_area
from .linalg import (
    CholFactor,
    cholesky,
    cholesky_jittered,
    chol_solve,
    invgamma_sample,
    normal_logpdf,
    psd_factor,
    tri_solve,
)

MONTHS_PER_CYCLE = 12


# ---------------------------------------------------------------------------
# basis functions for the process mean
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BasisSpec:
    """Mean-function basis: monthly indicators, a Fourier expansion, or a constant.

    The monthly kind uses unit-length month buckets recurring every 12 time
    units, with the first month as the reference level (intercept plus 11
    indicators). The Fourier kind is an intercept plus sine/cosine pairs for
    each period, so r = 1 + 2 * len(periods). The constant kind is the
    intercept alone (a flat trend).
    """

    kind: str
    periods: tuple = ()

    def __post_init__(self):
        if self.kind not in ("monthly", "fourier", "constant"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        periods = tuple(float(p) for p in self.periods)
        if self.kind == "fourier":
            if not periods:
                raise ValueError("fourier basis requires at least one period")
            if any(p <= 0 for p in periods):
                raise ValueError(f"periods must be positive, got {periods}")
        object.__setattr__(self, "periods", periods)

    @property
    def r(self) -> int:
        if self.kind == "monthly":
            return MONTHS_PER_CYCLE
        if self.kind == "constant":
            return 1
        return 1 + 2 * len(self.periods)


def _monthly_bucket_weights(a: float, b: float) -> np.ndarray:
    """Fraction of the interval (a, b) falling in each month bucket (mod 12)."""
    w = np.zeros(MONTHS_PER_CYCLE)
    m = math.floor(a)
    while m < b:
        overlap = min(b, m + 1.0) - max(a, float(m))
        if overlap > 0:
            w[int(m % MONTHS_PER_CYCLE)] += overlap
        m += 1
    return w / (b - a)


def build_basis(spec: BasisSpec, where) -> np.ndarray:
    """Basis vector at a time instant (scalar) or averaged over an interval (pair).

    Interval averages are exact: bucket-overlap fractions for the monthly
    kind, closed-form sine/cosine integrals for the Fourier kind.
    """
    interval = None
    if np.ndim(where) > 0:
        a, b = float(where[0]), float(where[1])
        if not a < b:
            raise ValueError(f"interval endpoints must satisfy a < b, got ({a}, {b})")
        interval = (a, b)
    out = np.empty(spec.r)
    out[0] = 1.0
    if spec.kind == "constant":
        return out
    if spec.kind == "monthly":
        if interval is None:
            t = float(where) % MONTHS_PER_CYCLE
            bucket = min(int(t), MONTHS_PER_CYCLE - 1)
            out[1:] = 0.0
            if bucket >= 1:
                out[bucket] = 1.0
        else:
            out[1:] = _monthly_bucket_weights(*interval)[1:]
        return out
    for i, p in enumerate(spec.periods):
        omega = 2.0 * np.pi / p
        if interval is None:
            t = float(where)
            out[1 + 2 * i] = np.sin(omega * t)
            out[2 + 2 * i] = np.cos(omega * t)
        else:
            a, b = interval
            scale = 1.0 / (omega * (b - a))
            out[1 + 2 * i] = (np.cos(omega * a) - np.cos(omega * b)) * scale
            out[2 + 2 * i] = (np.sin(omega * b) - np.sin(omega * a)) * scale
    return out


def basis_matrix_intervals(spec: BasisSpec, intervals) -> np.ndarray:
    arr = np.asarray(intervals, dtype=float).reshape(-1, 2)
    return np.array([build_basis(spec, iv) for iv in arr])


def basis_matrix_instants(spec: BasisSpec, times) -> np.ndarray:
    return np.array([build_basis(spec, float(t)) for t in np.atleast_1d(times)])


# ---------------------------------------------------------------------------
# priors and datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Priors:
    """Fixed hyperparameters of the conjugate hierarchical model."""

    mu_gamma: np.ndarray
    v_gamma: np.ndarray
    a_sigma: float
    b_sigma: float
    mu_beta: np.ndarray
    v_beta: np.ndarray
    a_tau: float
    b_tau: float

    def __post_init__(self):
        mu_g = np.asarray(self.mu_gamma, dtype=float).reshape(-1)
        v_g = np.asarray(self.v_gamma, dtype=float)
        mu_b = np.asarray(self.mu_beta, dtype=float).reshape(-1)
        v_b = np.asarray(self.v_beta, dtype=float)
        if v_g.shape != (len(mu_g), len(mu_g)):
            raise ValueError(f"v_gamma shape {v_g.shape} inconsistent with mu_gamma ({len(mu_g)})")
        if v_b.shape != (len(mu_b), len(mu_b)):
            raise ValueError(f"v_beta shape {v_b.shape} inconsistent with mu_beta ({len(mu_b)})")
        for name in ("a_sigma", "b_sigma", "a_tau", "b_tau"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        object.__setattr__(self, "mu_gamma", mu_g)
        object.__setattr__(self, "v_gamma", v_g)
        object.__setattr__(self, "mu_beta", mu_b)
        object.__setattr__(self, "v_beta", v_b)

    @classmethod
    def default(cls, r: int, p: int, gamma_scale: float = 1e3, beta_scale: float = 1e3,
                a_sigma: float = 2.0, b_sigma: float = 0.1,
                a_tau: float = 2.0, b_tau: float = 0.1) -> "Priors":
        """Weakly informative defaults: zero means, scaled identity covariances."""
        return cls(
            mu_gamma=np.zeros(r), v_gamma=gamma_scale * np.eye(r),
            a_sigma=a_sigma, b_sigma=b_sigma,
            mu_beta=np.zeros(p + 1), v_beta=beta_scale * np.eye(p + 1),
            a_tau=a_tau, b_tau=b_tau,
        )


@dataclass(frozen=True)
class PointDataset:
    """Covariate observations at point-referenced, temporally aggregated coordinates.

    Rows with missing covariate values must be excluded upstream; no
    imputation happens anywhere in the model.
    """

    points: tuple
    x: np.ndarray
    basis_spec: BasisSpec
    basis: np.ndarray = field(default=None)

    def __post_init__(self):
        points = tuple(self.points)
        x = np.asarray(self.x, dtype=float).reshape(-1)
        if len(points) != len(x):
            raise ValueError(f"{len(points)} points but {len(x)} covariate values")
        if not np.all(np.isfinite(x)):
            raise ValueError("covariate values must be finite (drop missing rows upstream)")
        basis = self.basis
        if basis is None:
            basis = basis_matrix_intervals(self.basis_spec, intervals_of(points))
        basis = np.asarray(basis, dtype=float)
        if basis.shape != (len(points), self.basis_spec.r):
            raise ValueError(f"basis shape {basis.shape} != ({len(points)}, {self.basis_spec.r})")
        if len(points) < self.basis_spec.r:
            raise ValueError(f"need at least r={self.basis_spec.r} observations, got {len(points)}")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "basis", basis)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def sites(self) -> np.ndarray:
        return np.array([p.site for p in self.points])

    @property
    def intervals(self) -> np.ndarray:
        return intervals_of(self.points)

    @property
    def interval_lengths(self) -> np.ndarray:
        iv = self.intervals
        return iv[:, 1] - iv[:, 0]


@dataclass(frozen=True)
class BlockOutcomeDataset:
    """Outcomes observed at polygon-interval blocks with a fixed design matrix.

    The noise variance of row k is tau^2 / (|B_k| |I_k|); set
    `include_interval_in_noise=False` to use tau^2 / |B_k| instead.
    """

    blocks: tuple
    y: np.ndarray
    w: np.ndarray
    include_interval_in_noise: bool = True
    basis: np.ndarray = None

    def __post_init__(self):
        blocks = tuple(self.blocks)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != len(y) or len(blocks) != len(y):
            raise ValueError(f"inconsistent shapes: {len(blocks)} blocks, y {y.shape}, w {w.shape}")
        if not np.all(np.isfinite(y)):
            raise ValueError("outcome values must be finite (drop missing rows upstream)")
        if len(y) < w.shape[1] + 1:
            raise ValueError(f"need at least p+1={w.shape[1] + 1} outcome rows, got {len(y)}")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w", w)

    @property
    def k(self) -> int:
        return len(self.y)

    @property
    def p(self) -> int:
        return self.w.shape[1]

    @property
    def volumes(self) -> np.ndarray:
        """|B_k| |I_k| (or |B_k| alone), the reciprocal noise-scaling weights."""
        areas = np.array([polygon_area(b.region) for b in self.blocks])
        if not self.include_interval_in_noise:
            return areas
        lengths = np.array([b.length for b in self.blocks])
        return areas * lengths


# ---------------------------------------------------------------------------
# candidate models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CandidateSpec:
    """One stacking candidate: process parameters plus noise-to-variance ratio."""

    params: ProcessParams
    delta2: float

    def __post_init__(self):
        if not np.isfinite(self.delta2) or self.delta2 <= 0:
            raise ValueError(f"delta2 must be positive, got {self.delta2}")

    def as_dict(self) -> dict:
        return {"phi_s": self.params.phi_s, "nu": self.params.nu,
                "phi_t": self.params.phi_t, "delta2": self.delta2}


@dataclass(frozen=True)
class CandidateFit:
    """Cached factorizations and conjugate posterior hyperparameters for one candidate."""

    spec: CandidateSpec
    data: PointDataset
    priors: Priors
    chol_vx: CholFactor
    chol_mz: CholFactor
    chol_ctilde: CholFactor
    m_gamma_mat: np.ndarray      # M_gamma, posterior covariance scale of gamma
    m_gamma_vec: np.ndarray      # m_gamma
    gamma_mean: np.ndarray       # M_gamma m_gamma
    chol_m_gamma: CholFactor
    a_sigma_star: float
    b_sigma_star: float
    proj_x: np.ndarray           # C V_X^{-1} X
    proj_basis: np.ndarray       # C V_X^{-1} Psi

    @property
    def n(self) -> int:
        return self.data.n


@dataclass
class PosteriorDraws:
    """Composition-sampling draws, one row per draw."""

    sigma2: np.ndarray                 # (B,)
    gamma: np.ndarray                  # (B, r)
    z: np.ndarray                      # (B, N)
    z_blocks: np.ndarray = None        # (B, K)
    tau2: np.ndarray = None            # (B,)
    beta: np.ndarray = None            # (B, p+1)

    def __post_init__(self):
        if np.any(self.sigma2 <= 0):
            raise ValueError("sigma2 draws must be positive")

    @property
    def n_draws(self) -> int:
        return len(self.sigma2)


def fit_candidate(data: PointDataset, spec: CandidateSpec, priors: Priors) -> CandidateFit:
    """Conjugate fit of the spatial-temporal regression module for one candidate.

    Caches chol(V_X), chol(M_z) via the identity M_z = delta^2 D V_X^{-1} C,
    chol(C) for predictive conditioning, and the posterior hyperparameters
    (M_gamma, m_gamma, a*_sigma, b*_sigma).
    """
    if len(priors.mu_gamma) != data.basis_spec.r:
        raise ValueError(f"priors dimension {len(priors.mu_gamma)} != basis r {data.basis_spec.r}")
    corr = cov_point_point(data.points, spec.params)
    d_tilde = 1.0 / data.interval_lengths
    v_x = corr + spec.delta2 * np.diag(d_tilde)
    try:
        chol_vx, _ = cholesky_jittered(v_x)
        vinv_corr = chol_solve(chol_vx, corr)
        m_z = spec.delta2 * d_tilde[:, None] * vinv_corr
        m_z = 0.5 * (m_z + m_z.T)
        chol_mz, _ = cholesky_jittered(m_z)
        chol_ct, _ = cholesky_jittered(corr)
    except Exception as err:
        raise FitError(f"factorization failed for candidate {spec.as_dict()}: {err}",
                       spec=spec) from err

    vinv_basis = chol_solve(chol_vx, data.basis)
    vinv_x = chol_solve(chol_vx, data.x)
    vg_chol = cholesky(priors.v_gamma)
    vg_inv_mu = chol_solve(vg_chol, priors.mu_gamma)
    m_gamma_inv = data.basis.T @ vinv_basis + chol_solve(vg_chol, np.eye(len(priors.mu_gamma)))
    m_gamma_inv = 0.5 * (m_gamma_inv + m_gamma_inv.T)
    m_gamma_vec = data.basis.T @ vinv_x + vg_inv_mu
    chol_mg_inv = cholesky(m_gamma_inv)
    m_gamma_mat = chol_solve(chol_mg_inv, np.eye(m_gamma_inv.shape[0]))
    m_gamma_mat = 0.5 * (m_gamma_mat + m_gamma_mat.T)
    gamma_mean = chol_solve(chol_mg_inv, m_gamma_vec)
    chol_m_gamma = cholesky(m_gamma_mat)

    a_star = priors.a_sigma + data.n / 2.0
    b_star = priors.b_sigma + 0.5 * (data.x @ vinv_x + priors.mu_gamma @ vg_inv_mu
                                     - m_gamma_vec @ gamma_mean)
    if not np.isfinite(b_star) or b_star <= 0:
        raise FitError(f"non-positive b*_sigma={b_star} for candidate {spec.as_dict()}", spec=spec)

    return CandidateFit(
        spec=spec, data=data, priors=priors,
        chol_vx=chol_vx, chol_mz=chol_mz, chol_ctilde=chol_ct,
        m_gamma_mat=m_gamma_mat, m_gamma_vec=m_gamma_vec, gamma_mean=gamma_mean,
        chol_m_gamma=chol_m_gamma, a_sigma_star=a_star, b_sigma_star=float(b_star),
        proj_x=corr @ vinv_x, proj_basis=corr @ vinv_basis,
    )


def sample_candidate(fit: CandidateFit, n_draws: int, rng: np.random.Generator) -> PosteriorDraws:
    """Composition sampling of (sigma^2, gamma, Z) from the exact posterior.

    sigma^2 ~ IG(a*, b*); gamma | sigma^2 is Gaussian around M_gamma m_gamma;
    Z | gamma, sigma^2 is Gaussian with covariance sigma^2 M_z around the
    trend plus the smoothed residual C V_X^{-1} (X - Psi gamma).
    """
    if n_draws < 1:
        raise ValueError(f"n_draws must be >= 1, got {n_draws}")
    sigma2 = invgamma_sample(fit.a_sigma_star, fit.b_sigma_star, rng, size=n_draws)
    sigma = np.sqrt(sigma2)
    gamma = fit.gamma_mean[None, :] + sigma[:, None] * (
        rng.standard_normal((n_draws, len(fit.gamma_mean))) @ fit.chol_m_gamma.lower.T)
    trend_adjust = fit.data.basis - fit.proj_basis
    means = fit.proj_x[None, :] + gamma @ trend_adjust.T
    z = means + sigma[:, None] * (
        rng.standard_normal((n_draws, fit.n)) @ fit.chol_mz.lower.T)
    return PosteriorDraws(sigma2=sigma2, gamma=gamma, z=z)


def _conditional_pieces(fit: CandidateFit, c_cross: np.ndarray, c_target: np.ndarray,
                        target_basis: np.ndarray):
    """Shared kriging algebra: weights, conditional covariance factor, trend term."""
    half = tri_solve(fit.chol_ctilde, c_cross)              # L^{-1} C_cross, (N, M)
    weights = tri_solve(fit.chol_ctilde, half, transpose=True).T   # C_cross^T C^{-1}, (M, N)
    cond = c_target - half.T @ half
    try:
        chol_cond = psd_factor(0.5 * (cond + cond.T))
    except Exception as err:
        raise PredictionError(f"conditional covariance could not be factored: {err}") from err
    trend = target_basis - weights @ fit.data.basis
    return weights, chol_cond, trend


def _conditional_draws(draws: PosteriorDraws, weights, chol_cond, trend,
                       rng: np.random.Generator) -> np.ndarray:
    means = draws.z @ weights.T + draws.gamma @ trend.T
    noise = rng.standard_normal((draws.n_draws, chol_cond.n)) @ chol_cond.lower.T
    return means + np.sqrt(draws.sigma2)[:, None] * noise


def predict_instants(fit: CandidateFit, draws: PosteriorDraws, targets,
                     rng: np.random.Generator) -> np.ndarray:
    """Per-draw samples of the latent process at exact space-time coordinates.

    The conditional covariance is computed once per fit; each posterior draw
    contributes one joint Gaussian sample. Returns (n_draws, len(targets)).
    """
    c_target, c_cross_t = cov_instant(targets, fit.data.points, fit.spec.params)
    target_basis = basis_matrix_instants(fit.data.basis_spec, [p.t for p in targets])
    weights, chol_cond, trend = _conditional_pieces(fit, c_cross_t.T, c_target, target_basis)
    return _conditional_draws(draws, weights, chol_cond, trend, rng)


def predict_blocks(fit: CandidateFit, draws: PosteriorDraws, blocks, mc_samples: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Per-draw samples of the block-averaged latent process (change of support).

    Spatial integrals in the covariances use shared within-polygon Monte
    Carlo sample sets drawn once from `rng`. Returns (n_draws, len(blocks)).
    """
    primary, secondary = draw_block_samples(blocks, mc_samples, rng)
    c_cross = cov_point_block(fit.data.points, blocks, fit.spec.params, mc_samples,
                              rng, samples=primary)
    c_bb = cov_block_block(blocks, fit.spec.params, mc_samples, rng,
                           samples=primary, samples2=secondary)
    target_basis = basis_matrix_intervals(fit.data.basis_spec, intervals_of(blocks))
    weights, chol_cond, trend = _conditional_pieces(fit, c_cross, c_bb, target_basis)
    return _conditional_draws(draws, weights, chol_cond, trend, rng)


def _diagnose_collinear(design: np.ndarray) -> list:
    """Column indices implicated in rank deficiency of the design matrix."""
    _, r_mat = np.linalg.qr(design)
    diag = np.abs(np.diag(r_mat))
    thresh = max(design.shape) * np.finfo(float).eps * (diag.max() if diag.size else 1.0)
    return [int(i) for i in np.where(diag <= thresh)[0]]


def fit_outcome_regression(outcome: BlockOutcomeDataset, zl_draws: np.ndarray,
                           priors: Priors, rng: np.random.Generator):
    """Module 1: heteroskedastic Bayesian linear regression, one fit per Z_L draw.

    For each draw b the design is [W, Z_L^(b)]; conditioning on the draws
    rather than a point estimate propagates the exposure uncertainty.
    Returns (tau2, beta) arrays of shapes (B,) and (B, p+1).
    """
    zl = np.asarray(zl_draws, dtype=float)
    if zl.ndim != 2 or zl.shape[1] != outcome.k:
        raise ValueError(f"zl_draws shape {zl.shape} inconsistent with K={outcome.k}")
    n_draws = zl.shape[0]
    p1 = outcome.p + 1
    if len(priors.mu_beta) != p1:
        raise ValueError(f"priors.mu_beta has length {len(priors.mu_beta)}, expected {p1}")
    weights = outcome.volumes                      # D_L^{-1} diagonal
    vb_chol = cholesky(priors.v_beta)
    vb_inv = chol_solve(vb_chol, np.eye(p1))
    vb_inv_mu = vb_inv @ priors.mu_beta

    design = np.broadcast_to(outcome.w, (n_draws, outcome.k, outcome.p))
    design = np.concatenate([design, zl[:, :, None]], axis=2)      # (B, K, p+1)
    weighted = design * weights[None, :, None]
    m_beta_inv = np.einsum("bki,bkj->bij", weighted, design) + vb_inv[None, :, :]
    m_beta_inv = 0.5 * (m_beta_inv + m_beta_inv.transpose(0, 2, 1))
    m_beta_vec = weighted.transpose(0, 2, 1) @ outcome.y + vb_inv_mu[None, :]
    try:
        chol_inv = np.linalg.cholesky(m_beta_inv)
    except np.linalg.LinAlgError as err:
        cols = _diagnose_collinear(np.concatenate([outcome.w, zl.mean(axis=0)[:, None]], axis=1))
        raise RegressionError(
            f"singular posterior precision for beta; collinear design columns {cols}",
            columns=cols) from err

    beta_hat = np.linalg.solve(m_beta_inv, m_beta_vec[:, :, None])[:, :, 0]
    a_star = priors.a_tau + outcome.k / 2.0
    quad = outcome.y @ (weights * outcome.y) + priors.mu_beta @ vb_inv_mu
    b_star = priors.b_tau + 0.5 * (quad - np.einsum("bi,bi->b", m_beta_vec, beta_hat))
    if np.any(b_star <= 0):
        raise RegressionError(f"non-positive b*_tau encountered (min {b_star.min()})")

    tau2 = b_star / rng.gamma(a_star, 1.0, size=n_draws)
    noise = np.linalg.solve(chol_inv.transpose(0, 2, 1),
                            rng.standard_normal((n_draws, p1, 1)))[:, :, 0]
    beta = beta_hat + np.sqrt(tau2)[:, None] * noise
    return tau2, beta


def log_pointwise_outcome_density(outcome: BlockOutcomeDataset, tau2: np.ndarray,
                                  beta: np.ndarray, zl_draws: np.ndarray) -> np.ndarray:
    """Per-draw, per-block outcome log likelihood matrix (feeds WAIC).

    Row b, column k is log N(y_k | [w_k, Z_L^(b)_k] beta^(b), tau^2(b) / vol_k)
    with vol_k the block volume, matching the heteroskedastic noise model.
    """
    zl = np.asarray(zl_draws, dtype=float)
    tau2 = np.asarray(tau2, dtype=float)
    beta = np.asarray(beta, dtype=float)
    means = beta[:, :-1] @ outcome.w.T + beta[:, -1][:, None] * zl
    variances = tau2[:, None] / outcome.volumes[None, :]
    return normal_logpdf(outcome.y[None, :], means, variances)
