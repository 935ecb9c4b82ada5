"""Candidate grids, simplex-constrained stacking weights, and mixture sampling.

The stacking objective is the mean log pointwise leave-one-out score of the
weighted candidate mixture; it is concave on the probability simplex and is
maximized by exponentiated gradient ascent with backtracking, which keeps
iterates strictly feasible without any projection step.
"""

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .covariance import ProcessParams, matern_corr
from .errors import ConvergenceError
from .loo import LooMatrix
from .model import CandidateSpec

# effective range: distance at which the correlation drops below this level
EFFECTIVE_RANGE_LEVEL = 0.05
# effective ranges of grid candidates span this fraction window of the max distance
RANGE_WINDOW = (0.2, 0.7)


def candidate_grid(phi_s_values, nu_values, phi_t_values, delta2_values):
    """Cartesian product of the four hyperparameter grids as CandidateSpec list."""
    specs = [
        CandidateSpec(ProcessParams(phi_s=ps, nu=nu, phi_t=pt), delta2=d2)
        for ps, nu, pt, d2 in itertools.product(phi_s_values, nu_values,
                                                phi_t_values, delta2_values)
    ]
    if not specs:
        raise ValueError("all four grids must be nonempty")
    return specs


def effective_range(phi_s: float, nu: float, max_search: float = None) -> float:
    """Distance at which the Matern correlation drops to 0.05."""
    if nu == 0.5:
        return np.log(1.0 / EFFECTIVE_RANGE_LEVEL) / phi_s
    hi = max_search if max_search is not None else 1.0
    while matern_corr(hi, phi_s, nu) > EFFECTIVE_RANGE_LEVEL:
        hi *= 2.0
        if hi > 1e12:
            raise ValueError("effective range search did not bracket")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if matern_corr(mid, phi_s, nu) > EFFECTIVE_RANGE_LEVEL:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _phi_for_range(target: float, nu: float) -> float:
    """Decay phi_s whose effective range equals `target` (bisection on phi)."""
    if nu == 0.5:
        return np.log(1.0 / EFFECTIVE_RANGE_LEVEL) / target
    # correlation at the target distance decreases in phi
    lo, hi = 1e-12, 1.0
    while matern_corr(target, hi, nu) > EFFECTIVE_RANGE_LEVEL:
        hi *= 2.0
        if hi > 1e15:
            raise ValueError("phi search did not bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if matern_corr(target, mid, nu) > EFFECTIVE_RANGE_LEVEL:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def effective_range_grid(max_dist: float, nu: float, n_points: int):
    """Spatial decay values whose effective ranges span 20-70% of `max_dist` evenly.

    A single point uses the window midpoint (45% of the max distance).
    Returned in increasing phi order (decreasing range).
    """
    if max_dist <= 0:
        raise ValueError(f"max_dist must be positive, got {max_dist}")
    if n_points < 1:
        raise ValueError(f"n_points must be >= 1, got {n_points}")
    lo, hi = RANGE_WINDOW
    if n_points == 1:
        fractions = [0.5 * (lo + hi)]
    else:
        fractions = np.linspace(hi, lo, n_points)
    return [_phi_for_range(f * max_dist, nu) for f in fractions]


@dataclass(frozen=True)
class StackingWeights:
    """Simplex weights over candidates plus optimization diagnostics."""

    alpha: np.ndarray
    objective: float
    iterations: int
    duplicate_columns: bool = False

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        if np.any(alpha < -1e-10) or abs(alpha.sum() - 1.0) > 1e-10:
            raise ValueError(f"weights must lie on the simplex, got {alpha}")
        object.__setattr__(self, "alpha", alpha)


def _has_duplicate_columns(dens: np.ndarray, tol: float = 1e-12) -> bool:
    g = dens.shape[1]
    for i in range(g):
        for j in range(i + 1, g):
            if np.linalg.norm(dens[:, i] - dens[:, j]) < tol:
                return True
    return False


def stacking_weights(loo: LooMatrix, tol: float = 1e-10,
                     max_iter: int = 20000) -> StackingWeights:
    """Maximize the mean log leave-one-out mixture score over the simplex.

    Exponentiated gradient ascent with Armijo-style backtracking; terminates
    when the objective improvement falls below `tol` or the KKT residual
    (max gradient coordinate minus 1) falls below 1e-8. If a vertex beats
    the interior iterate (a single dominant candidate), the exact corner is
    returned.
    """
    dens = loo.densities
    n, g = dens.shape
    log_dens = np.log(dens)
    row_shift = log_dens.max(axis=1, keepdims=True)
    scaled = np.exp(log_dens - row_shift)          # row rescaling shifts the objective
    offset = float(row_shift.mean())
    duplicates = _has_duplicate_columns(dens)
    if duplicates:
        warnings.warn("duplicate candidate columns: stacking weights are not unique",
                      RuntimeWarning, stacklevel=2)

    def objective(a):
        return float(np.mean(np.log(scaled @ a)))

    if g == 1:
        return StackingWeights(np.array([1.0]), objective(np.array([1.0])) + offset, 0,
                               duplicates)

    alpha = np.full(g, 1.0 / g)
    current = objective(alpha)
    step = 1.0
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        mix = scaled @ alpha
        grad = (scaled / mix[:, None]).mean(axis=0)
        if grad.max() - 1.0 < 1e-8:                # alpha @ grad == 1 identically
            converged = True
            break
        improved = False
        for _ in range(60):
            trial = alpha * np.exp(step * (grad - grad.max()))
            trial /= trial.sum()
            value = objective(trial)
            if value > current:
                improved = True
                break
            step *= 0.5
        if not improved:
            converged = True
            break
        gain = value - current
        alpha, current = trial, value
        step = min(step * 1.5, 1e4)
        if gain < tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(f"stacking optimizer did not converge in {max_iter} iterations",
                               last_iterate=alpha)

    # concavity sanity check: no vertex or the uniform mix may beat the optimum;
    # if a vertex does (dominant candidate), return that exact corner
    vertex_objectives = np.log(scaled).mean(axis=0)
    best_vertex = int(np.argmax(vertex_objectives))
    if vertex_objectives[best_vertex] > current:
        alpha = np.zeros(g)
        alpha[best_vertex] = 1.0
        current = float(vertex_objectives[best_vertex])
    uniform_value = objective(np.full(g, 1.0 / g))
    if uniform_value > current + 1e-9:
        raise ConvergenceError("optimizer ended below the uniform mixture; objective "
                               "not maximized", last_iterate=alpha)

    alpha = np.maximum(alpha, 0.0)
    alpha /= alpha.sum()
    return StackingWeights(alpha, current + offset, iterations, duplicates)


def stacked_sample(weights: StackingWeights, samplers, n_draws: int,
                   rng: np.random.Generator):
    """Mixture draws from the stacked posterior.

    `samplers` maps each candidate index to a callable (count, rng) -> array
    of `count` draws (rows). Candidates are chosen i.i.d. from the weight
    vector; returns (labels, draws) with draws stacked in label order.
    """
    if n_draws < 1:
        raise ValueError(f"n_draws must be >= 1, got {n_draws}")
    g = len(weights.alpha)
    labels = rng.choice(g, size=n_draws, p=weights.alpha)
    counts = np.bincount(labels, minlength=g)
    per_candidate = [samplers[idx](int(c), rng) if c else None for idx, c in enumerate(counts)]
    cursor = np.zeros(g, dtype=int)
    rows = []
    for lab in labels:
        rows.append(per_candidate[lab][cursor[lab]])
        cursor[lab] += 1
    return labels, np.asarray(rows)
