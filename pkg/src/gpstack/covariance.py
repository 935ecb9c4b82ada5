"""Separable space-time correlation kernels and integrated covariance matrices.

The temporal kernel is exponential, so every double integral of it over a
pair of intervals has a closed form (four interval arrangements: disjoint,
identical, partially overlapping, nested). Spatial integrals over polygon
blocks have no closed form and are estimated by Monte Carlo with
within-polygon samples; the time domain never requires numerical
integration.

All operations are pure; each takes its own random stream where Monte Carlo
is involved so parallel callers never share generator state.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import kv

from .errors import InvalidGeometryError
from .geometry import Polygon, pairwise_distances, sample_in_polygon

# below this, phi_s * d is treated as zero lag to avoid 0 * inf in the Bessel form
_TINY_LAG = 1e-30


@dataclass(frozen=True)
class ProcessParams:
    """Spatial-temporal process parameters (phi_s, nu, phi_t), all > 0.

    phi_t == 0 is rejected because the integrated temporal covariance carries
    1/phi_t^2 factors; pass phi_t >= 1e-6 to emulate negligible decay.
    """

    phi_s: float
    nu: float
    phi_t: float

    def __post_init__(self):
        for name in ("phi_s", "nu", "phi_t"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be a positive finite number, got {value}")


def _check_interval(interval, what="interval"):
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise ValueError(f"{what} endpoints must satisfy a < b, got ({a}, {b})")
    return a, b


@dataclass(frozen=True)
class SpaceTimePoint:
    """Point-referenced, temporally aggregated coordinate: a site with an interval."""

    site: np.ndarray
    interval: tuple

    def __post_init__(self):
        s = np.asarray(self.site, dtype=float).reshape(2)
        s.setflags(write=False)
        object.__setattr__(self, "site", s)
        object.__setattr__(self, "interval", _check_interval(self.interval))

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]


@dataclass(frozen=True)
class SpaceTimeBlock:
    """Areal, temporally aggregated coordinate: a polygon with an interval."""

    region: Polygon
    interval: tuple

    def __post_init__(self):
        if not isinstance(self.region, Polygon):
            raise InvalidGeometryError("region must be a Polygon")
        object.__setattr__(self, "interval", _check_interval(self.interval))

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]


@dataclass(frozen=True)
class InstantPoint:
    """Exact space-time coordinate (site, time instant)."""

    site: np.ndarray
    t: float

    def __post_init__(self):
        s = np.asarray(self.site, dtype=float).reshape(2)
        s.setflags(write=False)
        object.__setattr__(self, "site", s)
        object.__setattr__(self, "t", float(self.t))


def sites_of(points) -> np.ndarray:
    return np.array([p.site for p in points], dtype=float).reshape(-1, 2)


def intervals_of(points) -> np.ndarray:
    return np.array([p.interval for p in points], dtype=float).reshape(-1, 2)


def matern_corr(d, phi_s: float, nu: float):
    """Isotropic Matern correlation (phi_s d)^nu K_nu(phi_s d) / (2^(nu-1) Gamma(nu)).

    Closed forms are dispatched for nu in {0.5, 1.5, 2.5}; other orders use
    the modified Bessel function of the second kind. Returns 1 at zero lag.
    """
    if not np.isfinite(phi_s) or phi_s <= 0:
        raise ValueError(f"phi_s must be positive, got {phi_s}")
    if not np.isfinite(nu) or nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    d_arr = np.asarray(d, dtype=float)
    x = phi_s * d_arr
    if nu == 0.5:
        out = np.exp(-x)
    elif nu == 1.5:
        out = (1.0 + x) * np.exp(-x)
    elif nu == 2.5:
        out = (1.0 + x + x * x / 3.0) * np.exp(-x)
    else:
        out = np.ones_like(x)
        pos = x > _TINY_LAG
        xp = x[pos]
        with np.errstate(under="ignore"):
            out[pos] = xp**nu * kv(nu, xp) / (2.0 ** (nu - 1.0) * gamma_fn(nu))
    if out.ndim == 0:
        return float(out)
    return out


def exp_time_corr(t, t_other, phi_t: float):
    """Exponential temporal correlation exp(-phi_t |t - t'|)."""
    if not np.isfinite(phi_t) or phi_t <= 0:
        raise ValueError(f"phi_t must be positive, got {phi_t}")
    lag = np.abs(np.asarray(t, dtype=float) - np.asarray(t_other, dtype=float))
    out = np.exp(-phi_t * lag)
    if out.ndim == 0:
        return float(out)
    return out


def integrated_time_cov(a: float, b: float, c: float, d: float, phi_t: float) -> float:
    """Closed-form double integral of the exponential kernel over (a,b) x (c,d).

    Dispatches among the identical / nested / disjoint / overlapping interval
    arrangements (nested checked before overlap; the formulas agree on the
    boundary cases). Exactly symmetric under swapping the two intervals.
    """
    a, b = _check_interval((a, b), "first interval")
    c, d = _check_interval((c, d), "second interval")
    if not np.isfinite(phi_t) or phi_t <= 0:
        raise ValueError(f"phi_t must be positive, got {phi_t}")
    # normalize so the earlier-starting (longer on ties) interval comes first
    if (c, d - c) < (a, b - a):
        a, b, c, d = c, d, a, b

    def F(a1, a2):
        return np.exp(-phi_t * (a2 - a1))

    p2 = phi_t * phi_t
    if a == c and b == d:
        return 2.0 * (phi_t * (b - a) + F(a, b) - 1.0) / p2
    if d <= b:
        # (c,d) nested within (a,b)
        return (2.0 * phi_t * (d - c) + F(c, b) + F(a, d) - F(a, c) - F(d, b)) / p2
    if b <= c:
        # disjoint, (a,b) to the left
        return (F(a, d) + F(b, c) - F(a, c) - F(b, d)) / p2
    # partial overlap, a <= c < b < d
    return (2.0 * phi_t * (b - c) + F(a, d) + F(c, b) - F(a, c) - F(b, d)) / p2


def integrated_time_cov_pairwise(intervals_a: np.ndarray, intervals_b: np.ndarray,
                                 phi_t: float) -> np.ndarray:
    """Vectorized :func:`integrated_time_cov` over all interval pairs.

    intervals_a is (n, 2), intervals_b is (m, 2); returns (n, m).
    """
    ia = np.asarray(intervals_a, dtype=float).reshape(-1, 2)
    ib = np.asarray(intervals_b, dtype=float).reshape(-1, 2)
    a = ia[:, 0][:, None]
    b = ia[:, 1][:, None]
    c = ib[:, 0][None, :]
    d = ib[:, 1][None, :]
    # same normalization as the scalar path: earlier start (longer on ties) first
    swap = (c < a) | ((c == a) & ((d - c) < (b - a)))
    x1 = np.where(swap, c, a)
    y1 = np.where(swap, d, b)
    x2 = np.where(swap, a, c)
    y2 = np.where(swap, b, d)

    out = np.empty(np.broadcast(x1, x2).shape)
    nested = y2 <= y1
    disjoint = ~nested & (y1 <= x2)
    overlap = ~nested & ~disjoint

    def F(u, v):
        return np.exp(-phi_t * (v - u))

    for mask in (nested, disjoint, overlap):
        if not np.any(mask):
            continue
        u1, v1, u2, v2 = x1[mask], y1[mask], x2[mask], y2[mask]
        if mask is nested:
            vals = 2.0 * phi_t * (v2 - u2) + F(u2, v1) + F(u1, v2) - F(u1, u2) - F(v2, v1)
        elif mask is disjoint:
            vals = F(u1, v2) + F(v1, u2) - F(u1, u2) - F(v1, v2)
        else:
            vals = 2.0 * phi_t * (v1 - u2) + F(u1, v2) + F(u2, v1) - F(u1, u2) - F(v1, v2)
        out[mask] = vals
    return out / (phi_t * phi_t)


def interval_exp_integral(t0, interval_lo, interval_hi, phi_t: float) -> np.ndarray:
    """Closed-form single integral of exp(-phi_t |t0 - t|) over (lo, hi) pairs.

    Broadcasts t0 (n,) against intervals (m,), splitting the integral at t0
    when t0 falls inside an interval. Returns (n, m).
    """
    t = np.asarray(t0, dtype=float).reshape(-1, 1)
    lo = np.asarray(interval_lo, dtype=float).reshape(1, -1)
    hi = np.asarray(interval_hi, dtype=float).reshape(1, -1)
    out = np.empty(np.broadcast(t, lo).shape)
    left = t <= lo
    right = t >= hi
    inside = ~left & ~right
    bt, bl, bh = np.broadcast_arrays(t, lo, hi)
    for mask in (left, right, inside):
        if not np.any(mask):
            continue
        tm, lm, hm = bt[mask], bl[mask], bh[mask]
        if mask is left:
            vals = np.exp(-phi_t * (lm - tm)) - np.exp(-phi_t * (hm - tm))
        elif mask is right:
            vals = np.exp(-phi_t * (tm - hm)) - np.exp(-phi_t * (tm - lm))
        else:
            vals = 2.0 - np.exp(-phi_t * (tm - lm)) - np.exp(-phi_t * (hm - tm))
        out[mask] = vals
    return out / phi_t


def cov_point_point(points, params: ProcessParams) -> np.ndarray:
    """Correlation matrix of the temporally aggregated process at point coordinates.

    Entry (j, j') is the Matern spatial correlation times the integrated
    temporal covariance normalized by the interval lengths; no numerical
    quadrature is involved.
    """
    if len(points) < 1:
        raise ValueError("need at least one point")
    sites = sites_of(points)
    intervals = intervals_of(points)
    lens = intervals[:, 1] - intervals[:, 0]
    c_s = matern_corr(pairwise_distances(sites), params.phi_s, params.nu)
    c_t = integrated_time_cov_pairwise(intervals, intervals, params.phi_t)
    cov = c_s * c_t / np.outer(lens, lens)
    return 0.5 * (cov + cov.T)


def draw_block_samples(blocks, mc_samples: int, rng: np.random.Generator):
    """Within-polygon uniform sample sets used for spatial Monte Carlo integrals.

    Returns (primary, secondary): two independent lists of (mc_samples, 2)
    arrays per block. Primary sets feed cross- and off-diagonal entries;
    secondary sets pair with primary ones for same-block diagonal integrals.
    """
    if mc_samples < 1:
        raise ValueError(f"mc_samples must be >= 1, got {mc_samples}")
    primary = [sample_in_polygon(b.region, mc_samples, rng) for b in blocks]
    secondary = [sample_in_polygon(b.region, mc_samples, rng) for b in blocks]
    return primary, secondary


def cov_point_block(points, blocks, params: ProcessParams, mc_samples: int,
                    rng: np.random.Generator, samples=None) -> np.ndarray:
    """Cross-covariance between point coordinates and polygon-interval blocks.

    The temporal factor is exact; the within-polygon spatial integral is a
    Monte Carlo average over `mc_samples` uniform draws per block (pass
    `samples` to reuse precomputed sets). Deterministic given the generator.
    """
    if samples is None:
        samples, _ = draw_block_samples(blocks, mc_samples, rng)
    sites = sites_of(points)
    pt_intervals = intervals_of(points)
    blk_intervals = intervals_of(blocks)
    pt_lens = pt_intervals[:, 1] - pt_intervals[:, 0]
    blk_lens = blk_intervals[:, 1] - blk_intervals[:, 0]

    spatial = np.empty((len(points), len(blocks)))
    for k, s_k in enumerate(samples):
        spatial[:, k] = matern_corr(pairwise_distances(sites, s_k),
                                    params.phi_s, params.nu).mean(axis=1)
    temporal = integrated_time_cov_pairwise(pt_intervals, blk_intervals, params.phi_t)
    return spatial * temporal / np.outer(pt_lens, blk_lens)


def cov_block_block(blocks, params: ProcessParams, mc_samples: int,
                    rng: np.random.Generator, samples=None, samples2=None) -> np.ndarray:
    """Covariance matrix of the block-averaged process.

    Each double spatial integral is the mean of the kernel over the full
    cross product of two independent within-polygon sample sets: the two
    blocks' primary sets off the diagonal, and a block's primary paired with
    its independent secondary set (2 x mc_samples draws) on the diagonal,
    keeping every entry unbiased. Only the upper triangle is computed;
    symmetry is exact by construction.
    """
    if samples is None or samples2 is None:
        primary, secondary = draw_block_samples(blocks, mc_samples, rng)
        samples = samples if samples is not None else primary
        samples2 = samples2 if samples2 is not None else secondary
    k_n = len(blocks)
    blk_intervals = intervals_of(blocks)
    blk_lens = blk_intervals[:, 1] - blk_intervals[:, 0]

    spatial = np.empty((k_n, k_n))
    for k in range(k_n):
        d_kk = pairwise_distances(samples[k], samples2[k])
        spatial[k, k] = matern_corr(d_kk, params.phi_s, params.nu).mean()
        for k2 in range(k + 1, k_n):
            d = pairwise_distances(samples[k], samples[k2])
            spatial[k, k2] = matern_corr(d, params.phi_s, params.nu).mean()
            spatial[k2, k] = spatial[k, k2]
    temporal = integrated_time_cov_pairwise(blk_intervals, blk_intervals, params.phi_t)
    return spatial * temporal / np.outer(blk_lens, blk_lens)


def cov_instant(instants, ref_points, params: ProcessParams):
    """Covariances involving exact space-time coordinates.

    Returns (C_inst, C_cross): the plain-kernel matrix among the instants and
    the cross matrix against temporally aggregated reference points, whose
    temporal factor is the closed-form single integral of the exponential
    kernel over each reference interval.
    """
    if len(instants) < 1:
        raise ValueError("need at least one prediction instant")
    inst_sites = sites_of(instants)
    inst_t = np.array([p.t for p in instants], dtype=float)
    c_inst = matern_corr(pairwise_distances(inst_sites), params.phi_s, params.nu) \
        * np.exp(-params.phi_t * np.abs(inst_t[:, None] - inst_t[None, :]))
    np.fill_diagonal(c_inst, 1.0)
    c_inst = 0.5 * (c_inst + c_inst.T)

    ref_sites = sites_of(ref_points)
    ref_intervals = intervals_of(ref_points)
    lens = ref_intervals[:, 1] - ref_intervals[:, 0]
    spatial = matern_corr(pairwise_distances(inst_sites, ref_sites), params.phi_s, params.nu)
    temporal = interval_exp_integral(inst_t, ref_intervals[:, 0], ref_intervals[:, 1],
                                     params.phi_t) / lens[None, :]
    return c_inst, spatial * temporal
