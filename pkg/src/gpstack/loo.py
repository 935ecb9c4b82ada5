"""Leave-one-out predictive densities per candidate model.

Two routes: the exact closed form (a location-scale t density, assembled by
deleting one row/column from the cached Cholesky factor with a rank-one
update, O(N^3) over all points instead of O(N^4)), and Pareto-smoothed
importance sampling over existing posterior draws (no refitting, O(N log N)).
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import TailTooSmallError
from .linalg import cholesky, chol_drop_index, chol_solve, normal_logpdf, student_t_logpdf
from .model import CandidateFit, PosteriorDraws

# tail shape above which a PSIS estimate is considered unreliable
KHAT_WARN_THRESHOLD = 0.7
# densities are floored here so downstream logs stay finite
_DENSITY_FLOOR = np.finfo(float).tiny


@dataclass(frozen=True)
class GpdFit:
    """Generalized Pareto tail fit: shape k (any sign) and scale sigma > 0."""

    k: float
    sigma: float

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class LooMatrix:
    """N x G matrix of leave-one-out predictive densities.

    `methods` tags each column as "exact" or "psis"; `khat` holds the PSIS
    tail diagnostics (NaN where not applicable). Densities are floored at
    the smallest positive float so logs stay finite.
    """

    densities: np.ndarray
    methods: tuple
    khat: np.ndarray = None

    def __post_init__(self):
        dens = np.asarray(self.densities, dtype=float)
        if dens.ndim != 2:
            raise ValueError(f"densities must be 2-D, got shape {dens.shape}")
        if not np.all(np.isfinite(dens)):
            raise ValueError("leave-one-out densities must be finite")
        dens = np.maximum(dens, _DENSITY_FLOOR)
        methods = tuple(self.methods)
        if len(methods) != dens.shape[1]:
            raise ValueError(f"{len(methods)} method tags for {dens.shape[1]} columns")
        khat = self.khat
        if khat is None:
            khat = np.full(dens.shape, np.nan)
        khat = np.asarray(khat, dtype=float)
        if khat.shape != dens.shape:
            raise ValueError(f"khat shape {khat.shape} != densities shape {dens.shape}")
        object.__setattr__(self, "densities", dens)
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "khat", khat)

    @property
    def n_points(self) -> int:
        return self.densities.shape[0]

    @property
    def n_candidates(self) -> int:
        return self.densities.shape[1]

    def high_khat_count(self) -> int:
        with np.errstate(invalid="ignore"):
            return int(np.sum(self.khat > KHAT_WARN_THRESHOLD))


# ---------------------------------------------------------------------------
# exact closed-form route
# ---------------------------------------------------------------------------

def exact_loo_logpdf(fit: CandidateFit, j: int) -> float:
    """Log of the exact leave-one-out predictive density at observation j.

    The held-out predictive is a location-scale t with 2 a*_{sigma,j} degrees
    of freedom, built from the conjugate posterior of the model refitted
    without row j; the (N-1)-sized Cholesky factor comes from a rank-one
    deletion of the cached factor rather than a refactorization.
    """
    data = fit.data
    n = data.n
    if n < 2:
        raise ValueError("leave-one-out requires at least 2 observations")
    if not 0 <= j < n:
        raise IndexError(f"index {j} out of range for N={n}")
    if fit.chol_vx is None:
        raise ValueError("fit was loaded without chol(V_X); refit to compute exact LOO")
    lower = fit.chol_vx.lower
    vx_col = lower @ lower[j]                       # column j of V_X
    v_jj = vx_col[j]
    r_j = np.delete(vx_col, j)                      # cross-covariances to the rest
    x_rest = np.delete(data.x, j)
    basis_rest = np.delete(data.basis, j, axis=0)

    factor_rest = chol_drop_index(fit.chol_vx, j)
    rhs = np.column_stack([x_rest, r_j, basis_rest])
    solved = chol_solve(factor_rest, rhs)
    vinv_x = solved[:, 0]
    vinv_r = solved[:, 1]
    vinv_basis = solved[:, 2:]

    priors = fit.priors
    vg_chol = cholesky(priors.v_gamma)
    vg_inv_mu = chol_solve(vg_chol, priors.mu_gamma)
    m_gamma_inv = basis_rest.T @ vinv_basis + chol_solve(vg_chol, np.eye(len(priors.mu_gamma)))
    m_gamma_vec = basis_rest.T @ vinv_x + vg_inv_mu
    gamma_hat = np.linalg.solve(m_gamma_inv, m_gamma_vec)
    h_j = data.basis[j] - basis_rest.T @ vinv_r

    a_star = priors.a_sigma + (n - 1) / 2.0
    b_star = priors.b_sigma + 0.5 * (x_rest @ vinv_x + priors.mu_gamma @ vg_inv_mu
                                     - m_gamma_vec @ gamma_hat)
    loc = r_j @ vinv_x + h_j @ gamma_hat
    var_cond = v_jj - r_j @ vinv_r + h_j @ np.linalg.solve(m_gamma_inv, h_j)
    scale = np.sqrt((b_star / a_star) * var_cond)
    return student_t_logpdf(data.x[j], 2.0 * a_star, loc, scale)


def exact_loo(fit: CandidateFit, j: int) -> float:
    """Exact leave-one-out predictive density at observation j."""
    return float(np.exp(exact_loo_logpdf(fit, j)))


def exact_loo_all(fit: CandidateFit) -> np.ndarray:
    """Exact leave-one-out densities for every observation (sequential in j)."""
    return np.exp([exact_loo_logpdf(fit, j) for j in range(fit.data.n)])


# ---------------------------------------------------------------------------
# Pareto-smoothed importance sampling route
# ---------------------------------------------------------------------------

def _gpd_fit_rows(tails: np.ndarray):
    """Profile-likelihood generalized Pareto fit, vectorized across rows.

    `tails` holds ascending positive exceedances, one tail per row. Returns
    (k, sigma, ok) where rows with a degenerate tail have ok=False.
    """
    n_rows, n = tails.shape
    ok = (tails[:, -1] > 0) & (np.ptp(tails, axis=1) > 0)
    k = np.full(n_rows, np.nan)
    sigma = np.full(n_rows, np.nan)
    if not np.any(ok):
        return k, sigma, ok
    y = tails[ok]
    m = 30 + int(np.sqrt(n))
    quartile = y[:, (n - 2) // 4]
    quartile = np.where(quartile > 0, quartile, y[:, -1])
    grid = 1.0 - np.sqrt(m / (np.arange(m, dtype=float) + 0.5))
    b = grid[None, :] / (3.0 * quartile[:, None]) + 1.0 / y[:, -1][:, None]
    k_grid = np.mean(np.log1p(-b[:, :, None] * y[:, None, :]), axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_lik = n * (np.log(-b / k_grid) - k_grid - 1.0)
    log_lik = np.nan_to_num(log_lik, nan=-np.inf, neginf=-np.inf)
    weights = np.exp(log_lik - logsumexp(log_lik, axis=1, keepdims=True))
    b_post = np.sum(b * weights, axis=1)
    k_post = np.mean(np.log1p(-b_post[:, None] * y), axis=1)
    sigma_post = -k_post / b_post
    # weak regularization of the shape toward 0.5 (10 pseudo-observations)
    k_post = (n * k_post + 5.0) / (n + 10.0)
    valid = np.isfinite(sigma_post) & (sigma_post > 0) & np.isfinite(k_post)
    k[ok] = np.where(valid, k_post, np.nan)
    sigma[ok] = np.where(valid, sigma_post, np.nan)
    ok[ok.nonzero()[0][~valid]] = False
    return k, sigma, ok


def gpd_fit_tail(exceedances) -> GpdFit:
    """Generalized Pareto fit of positive exceedances (empirical Bayes profile).

    Deterministic; requires at least 5 points and a non-degenerate sample.
    """
    y = np.sort(np.asarray(exceedances, dtype=float))
    if y.size < 5:
        raise TailTooSmallError(f"need at least 5 exceedances, got {y.size}")
    if np.any(y < 0):
        raise ValueError("exceedances must be nonnegative")
    k, sigma, ok = _gpd_fit_rows(y[None, :])
    if not ok[0]:
        raise ValueError("degenerate tail sample (constant or nonpositive)")
    return GpdFit(float(k[0]), float(sigma[0]))


def _gpd_quantile(u: np.ndarray, k: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Quantiles of GPD(k, sigma) at probabilities u, stable near k = 0."""
    k = k[:, None]
    sigma = sigma[:, None]
    log1mu = np.log1p(-u)[None, :]
    small = np.abs(k) < 1e-12
    with np.errstate(over="ignore"):
        general = sigma * np.expm1(-k * log1mu) / np.where(small, 1.0, k)
    return np.where(small, -sigma * log1mu, general)


def pareto_smooth_rows(log_ratios: np.ndarray):
    """Pareto-smooth raw importance ratios, row by row.

    Fits a generalized Pareto distribution to the ceil(min(.2 B, 3 sqrt(B)))
    largest ratios of each row, replaces them with expected order statistics
    of the fitted tail, and truncates at the raw maximum. Returns
    (log_weights, khat); rows where the tail cannot be fitted keep their raw
    ratios and report NaN.
    """
    lw = np.asarray(log_ratios, dtype=float)
    if lw.ndim != 2:
        raise ValueError(f"log_ratios must be 2-D, got shape {lw.shape}")
    n_rows, n_draws = lw.shape
    tail_len = int(np.ceil(min(0.2 * n_draws, 3.0 * np.sqrt(n_draws))))
    khat = np.full(n_rows, np.nan)
    shift = lw.max(axis=1, keepdims=True)
    w = np.exp(lw - shift)
    if tail_len < 5 or n_draws - tail_len < 1:
        return lw - shift, khat

    order = np.argsort(w, axis=1)
    w_sorted = np.take_along_axis(w, order, axis=1)
    cut = w_sorted[:, -tail_len - 1]
    exceed = w_sorted[:, -tail_len:] - cut[:, None]
    k, sigma, ok = _gpd_fit_rows(exceed)
    khat = np.where(ok, k, np.nan)
    if np.any(ok):
        u = (np.arange(tail_len) + 0.5) / tail_len
        smoothed = cut[ok, None] + _gpd_quantile(u, k[ok], sigma[ok])
        smoothed = np.minimum(smoothed, w_sorted[ok, -1][:, None])
        rows = np.nonzero(ok)[0]
        w[rows[:, None], order[ok][:, -tail_len:]] = smoothed
    with np.errstate(divide="ignore"):
        return np.log(w), khat


def psis_loo(draws: PosteriorDraws, data, delta2: float):
    """PSIS approximation of all leave-one-out densities from posterior draws.

    The likelihood kernel of point j uses the full observation-noise variance
    delta^2 sigma^2 / |I_j|. Returns (densities, khat), both length N;
    khat > 0.7 signals an unreliable point but is not fatal.
    """
    if draws.n_draws < 100:
        raise ValueError(f"PSIS needs at least 100 draws, got {draws.n_draws}")
    noise_var = delta2 * draws.sigma2[:, None] / data.interval_lengths[None, :]
    loglik = normal_logpdf(data.x[None, :], draws.z, noise_var)      # (B, N)
    log_w, khat = pareto_smooth_rows(-loglik.T)                      # ratios 1/lik
    log_dens = logsumexp(log_w + loglik.T, axis=1) - logsumexp(log_w, axis=1)
    return np.exp(log_dens), khat


def loo_column(fit: CandidateFit, draws: PosteriorDraws, method: str):
    """One candidate's leave-one-out column: (densities, khat) by the chosen method."""
    if method == "exact":
        return exact_loo_all(fit), np.full(fit.data.n, np.nan)
    if method == "psis":
        if draws is None:
            raise ValueError("psis method requires posterior draws")
        return psis_loo(draws, fit.data, fit.spec.delta2)
    raise ValueError(f"unknown loo method {method!r}")


def build_loo_matrix(fits, draws_list=None, method: str = "exact") -> LooMatrix:
    """Assemble the N x G leave-one-out density matrix across candidates."""
    if not fits:
        raise ValueError("need at least one candidate fit")
    if draws_list is None:
        draws_list = [None] * len(fits)
    columns, khats = [], []
    for fit, draws in zip(fits, draws_list):
        dens, khat = loo_column(fit, draws, method)
        columns.append(dens)
        khats.append(khat)
    matrix = LooMatrix(np.column_stack(columns), (method,) * len(fits),
                       np.column_stack(khats))
    high = matrix.high_khat_count()
    if high:
        warnings.warn(f"{high} leave-one-out estimates have khat > {KHAT_WARN_THRESHOLD}",
                      RuntimeWarning, stacklevel=2)
    return matrix
