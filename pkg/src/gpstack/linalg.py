"""Dense numerical kernels: Cholesky factorizations, triangular solves, the
rank-one row/column-deletion update used by exact leave-one-out, and samplers
and densities for the model's distribution families.

Everything is pure and reentrant. Factorizations of distinct matrices may run
in parallel; a single factorization is not internally threaded.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import get_lapack_funcs, solve_triangular
from scipy.special import gammaln

from .errors import FactorizationError

try:
    from numba import njit
except ImportError:          # pragma: no cover - numba is an optional speedup
    njit = None

# graded jitter ladder applied to marginally indefinite (MC-estimated) matrices
JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)


@dataclass(frozen=True)
class CholFactor:
    """Lower-triangular factor L with A = L L^T and strictly positive diagonal."""

    lower: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.lower, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"factor must be square, got shape {mat.shape}")
        object.__setattr__(self, "lower", mat)

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.lower @ self.lower.T


def cholesky(matrix: np.ndarray) -> CholFactor:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises
    ------
    FactorizationError
        Carrying the zero-based index of the failing pivot, so callers can
        decide whether to retry with jitter.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    (potrf,) = get_lapack_funcs(("potrf",), (a,))
    c, info = potrf(a, lower=True, overwrite_a=False, clean=True)
    if info > 0:
        raise FactorizationError(info - 1)
    if info < 0:
        raise ValueError(f"illegal value in argument {-info} of internal potrf")
    return CholFactor(c)


def cholesky_jittered(matrix: np.ndarray, ladder=JITTER_LADDER):
    """Cholesky with a graded diagonal jitter fallback.

    Returns (factor, jitter_used). Raises FactorizationError if even the
    largest jitter in the ladder fails.
    """
    last_err = None
    for jitter in ladder:
        try:
            a = matrix if jitter == 0.0 else matrix + jitter * np.eye(matrix.shape[0])
            return cholesky(a), jitter
        except FactorizationError as err:
            last_err = err
    raise last_err


def psd_factor(matrix: np.ndarray, ladder=JITTER_LADDER) -> CholFactor:
    """Factor for Monte-Carlo-estimated covariances that may be slightly indefinite.

    Tries the graded jitter ladder first; if the matrix is indefinite beyond
    the largest jitter (MC noise on a nearly singular conditional), projects
    onto the PSD cone by clipping negative eigenvalues and factors the
    projection. Raises FactorizationError only for non-finite input.
    """
    if not np.all(np.isfinite(matrix)):
        raise FactorizationError(0, "covariance matrix has non-finite entries")
    try:
        factor, _ = cholesky_jittered(matrix, ladder)
        return factor
    except FactorizationError:
        pass
    eigvals, eigvecs = np.linalg.eigh(matrix)
    floor = 1e-12 * max(eigvals[-1], 1.0)
    clipped = (eigvecs * np.maximum(eigvals, 0.0)) @ eigvecs.T
    clipped[np.diag_indices_from(clipped)] += floor
    factor, _ = cholesky_jittered(0.5 * (clipped + clipped.T))
    return factor


def tri_solve(factor: CholFactor, rhs: np.ndarray, transpose: bool = False) -> np.ndarray:
    """Solve L x = rhs (or L^T x = rhs when transpose=True)."""
    return solve_triangular(factor.lower, rhs, lower=True, trans=1 if transpose else 0,
                            check_finite=False)


def chol_solve(factor: CholFactor, rhs: np.ndarray) -> np.ndarray:
    """Solve (L L^T) x = rhs via two triangular solves."""
    return tri_solve(factor, tri_solve(factor, rhs), transpose=True)


def _givens_update_loop(out, x):
    # sequential Givens sweep; scalar loops so numba can compile it
    n = x.shape[0]
    for k in range(n):
        a = out[k, k]
        b = x[k]
        if b == 0.0:
            continue
        if abs(a) > abs(b):
            t = b / a
            u = math.sqrt(1.0 + t * t)
            if a < 0.0:
                u = -u
            c = 1.0 / u
            s = c * t
            r = a * u
        else:
            t = a / b
            u = math.sqrt(1.0 + t * t)
            if b < 0.0:
                u = -u
            s = 1.0 / u
            c = s * t
            r = b * u
        out[k, k] = r
        for i in range(k + 1, n):
            oi = out[i, k]
            xi = x[i]
            out[i, k] = c * oi + s * xi
            x[i] = c * xi - s * oi


if njit is not None:
    _givens_update_loop = njit(cache=True)(_givens_update_loop)


def chol_update(lower: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Rank-one update: factor of L L^T + x x^T in O(n^2) via Givens rotations."""
    out = np.array(lower, dtype=float)
    x = np.array(x, dtype=float)
    _givens_update_loop(out, x)
    return out


def chol_drop_index(factor: CholFactor, index: int) -> CholFactor:
    """Factor of the matrix with row and column `index` removed.

    Keeps the leading block of L untouched and restores triangularity of the
    trailing block with a rank-one Givens update, costing O((n - index)^2)
    instead of a full refactorization.
    """
    n = factor.n
    if not 0 <= index < n:
        raise IndexError(f"index {index} out of range for size {n}")
    lower = factor.lower
    out = np.empty((n - 1, n - 1))
    out[:index, :index] = lower[:index, :index]
    out[index:, :index] = lower[index + 1:, :index]
    out[:index, index:] = 0.0
    out[index:, index:] = chol_update(lower[index + 1:, index + 1:], lower[index + 1:, index])
    return CholFactor(out)


def mvn_sample(mean: np.ndarray, factor: CholFactor, rng: np.random.Generator,
               size: int = None) -> np.ndarray:
    """Draw from N(mean, L L^T); returns (n,) or (size, n)."""
    mean = np.asarray(mean, dtype=float)
    if size is None:
        return mean + factor.lower @ rng.standard_normal(factor.n)
    return mean[None, :] + rng.standard_normal((size, factor.n)) @ factor.lower.T


def invgamma_sample(shape: float, scale: float, rng: np.random.Generator, size=None):
    """Inverse-gamma draw(s): 1 / Gamma(shape, rate=scale); mean scale/(shape-1)."""
    if shape <= 0 or scale <= 0:
        raise ValueError(f"shape and scale must be positive, got {shape}, {scale}")
    return 1.0 / rng.gamma(shape, 1.0 / scale, size=size)


def invgamma_logpdf(x, shape: float, scale: float):
    """Log density of the inverse-gamma distribution."""
    if shape <= 0 or scale <= 0:
        raise ValueError(f"shape and scale must be positive, got {shape}, {scale}")
    x = np.asarray(x, dtype=float)
    out = shape * np.log(scale) - gammaln(shape) - (shape + 1.0) * np.log(x) - scale / x
    if out.ndim == 0:
        return float(out)
    return out


def student_t_logpdf(x, df: float, loc: float = 0.0, scale: float = 1.0):
    """Log density of the location-scale Student t distribution."""
    if df <= 0 or scale <= 0:
        raise ValueError(f"df and scale must be positive, got {df}, {scale}")
    x = np.asarray(x, dtype=float)
    z = (x - loc) / scale
    out = (gammaln((df + 1.0) / 2.0) - gammaln(df / 2.0)
           - 0.5 * np.log(df * np.pi) - np.log(scale)
           - (df + 1.0) / 2.0 * np.log1p(z * z / df))
    if out.ndim == 0:
        return float(out)
    return out


def normal_logpdf(x, mean, var):
    """Log density of N(mean, var), vectorized."""
    x = np.asarray(x, dtype=float)
    return -0.5 * (np.log(2.0 * np.pi * var) + (x - mean) ** 2 / var)
