"""Model evaluation helpers: WAIC and the empirical semivariogram."""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .geometry import pairwise_distances
from .model import PointDataset


@dataclass(frozen=True)
class WaicReport:
    """Widely applicable information criterion with per-point contributions.

    waic = -2 (lppd - p_waic); pointwise entries sum to waic.
    """

    waic: float
    lppd: float
    p_waic: float
    pointwise: np.ndarray

    def as_dict(self) -> dict:
        return {"waic": self.waic, "lppd": self.lppd, "p_waic": self.p_waic,
                "pointwise": [float(v) for v in self.pointwise]}


def waic(loglik: np.ndarray) -> WaicReport:
    """WAIC from a draws-by-points matrix of pointwise log likelihoods.

    lppd is the log of the draw-averaged likelihood per point (log-sum-exp
    stabilized); the effective-parameter penalty is the unbiased per-point
    variance of the log likelihood across draws. A single draw forces the
    penalty to zero with a warning.
    """
    ll = np.asarray(loglik, dtype=float)
    if ll.ndim != 2:
        raise ValueError(f"loglik must be (draws, points), got shape {ll.shape}")
    n_draws, n_points = ll.shape
    if n_points < 1:
        raise ValueError("need at least one point")
    lppd_i = logsumexp(ll, axis=0) - np.log(n_draws)
    if n_draws < 2:
        warnings.warn("single draw: p_waic is forced to 0", RuntimeWarning, stacklevel=2)
        p_i = np.zeros(n_points)
    else:
        p_i = np.var(ll, axis=0, ddof=1)
    pointwise = -2.0 * (lppd_i - p_i)
    return WaicReport(waic=float(pointwise.sum()), lppd=float(lppd_i.sum()),
                      p_waic=float(p_i.sum()), pointwise=pointwise)


def empirical_semivariogram(data: PointDataset, n_bins: int = 15):
    """Matheron semivariogram of detrended covariate values over spatial distance.

    Residuals come from a least-squares fit of the dataset's basis matrix.
    Bins cover (0, half the maximum pairwise distance]; empty bins report a
    NaN estimate with pair count 0. Returns a list of
    (bin_center, gamma_hat, pair_count) tuples.
    """
    if data.n < 10:
        raise ValueError(f"need at least 10 observations, got {data.n}")
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    coef, *_ = np.linalg.lstsq(data.basis, data.x, rcond=None)
    resid = data.x - data.basis @ coef
    dist = pairwise_distances(data.sites)
    iu = np.triu_indices(data.n, k=1)
    d = dist[iu]
    sq = (resid[:, None] - resid[None, :])[iu] ** 2
    max_lag = d.max() / 2.0
    edges = np.linspace(0.0, max_lag, n_bins + 1)
    rows = []
    for i in range(n_bins):
        lo, hi = edges[i], edges[i + 1]
        mask = (d > lo) & (d <= hi) if i > 0 else (d <= hi)
        count = int(mask.sum())
        gamma = float(sq[mask].mean() / 2.0) if count else float("nan")
        rows.append((float(0.5 * (lo + hi)), gamma, count))
    return rows


def nugget_sill_estimate(variogram_rows):
    """Crude nugget and sill read off an empirical semivariogram.

    The nugget is the first nonempty bin's estimate, the sill the mean of the
    last third of nonempty bins; both are guidance for choosing a noise-ratio
    candidate grid, not fitted parameters.
    """
    filled = [(d, g) for d, g, c in variogram_rows if c > 0 and np.isfinite(g)]
    if len(filled) < 3:
        raise ValueError("too few nonempty variogram bins to estimate nugget and sill")
    nugget = filled[0][1]
    tail = [g for _, g in filled[-max(1, len(filled) // 3):]]
    sill = float(np.mean(tail))
    return {"nugget": float(nugget), "sill": sill,
            "noise_ratio": float(nugget / max(sill - nugget, 1e-12))}
