"""Independent reference implementations used as test oracles.

Everything here is deliberately written as straight-line brute force (dense
inverses, Riemann sums, kink-split quadrature, rejection sampling) so it
shares no code path with the library under test.
"""

import numpy as np

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def _gl_rect(f, x0, x1, y0, y1):
    xs = 0.5 * (x1 - x0) * _GL_NODES + 0.5 * (x0 + x1)
    ys = 0.5 * (y1 - y0) * _GL_NODES + 0.5 * (y0 + y1)
    w = np.outer(_GL_WEIGHTS, _GL_WEIGHTS) * 0.25 * (x1 - x0) * (y1 - y0)
    return float(np.sum(w * f(xs[:, None], ys[None, :])))


def _diag_square(phi, u, v):
    # twice the lower-triangle integral of exp(-phi (t - t')) via a Duffy map
    h = v - u
    xi = 0.5 * (_GL_NODES + 1.0)
    eta = 0.5 * (_GL_NODES + 1.0)
    w = np.outer(0.5 * _GL_WEIGHTS, 0.5 * _GL_WEIGHTS)
    vals = np.exp(-phi * h * xi[:, None] * (1.0 - eta[None, :])) * (h * h * xi[:, None])
    return 2.0 * float(np.sum(w * vals))


def time_cov_quadrature(a, b, c, d, phi):
    """2-D quadrature of exp(-phi |t - t'|) over (a,b) x (c,d).

    The rectangle is split at the other interval's endpoints so every piece
    is either smooth (fixed sign of t - t') or a diagonal square handled by
    a Duffy transform; 48-point Gauss-Legendre per piece is then accurate to
    machine precision.
    """
    cuts_t = sorted({a, b} | {x for x in (c, d) if a < x < b})
    cuts_s = sorted({c, d} | {x for x in (a, b) if c < x < d})
    total = 0.0
    for i in range(len(cuts_t) - 1):
        for j in range(len(cuts_s) - 1):
            x0, x1 = cuts_t[i], cuts_t[i + 1]
            y0, y1 = cuts_s[j], cuts_s[j + 1]
            if x0 == y0 and x1 == y1:
                total += _diag_square(phi, x0, x1)
            else:
                total += _gl_rect(lambda t, s: np.exp(-phi * np.abs(t - s)), x0, x1, y0, y1)
    return total


def riemann_point_cov(sites, intervals, phi_s, nu, phi_t, steps=2000):
    """Brute-force covariance matrix discretizing each interval at `steps` points."""
    from scipy.special import gamma as gamma_fn
    from scipy.special import kv

    n = len(sites)
    grids = []
    for a, b in intervals:
        # midpoint rule
        h = (b - a) / steps
        grids.append(a + (np.arange(steps) + 0.5) * h)
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            d = np.linalg.norm(np.asarray(sites[i]) - np.asarray(sites[j]))
            if d == 0:
                spatial = 1.0
            elif nu == 0.5:
                spatial = np.exp(-phi_s * d)
            else:
                x = phi_s * d
                spatial = x**nu * kv(nu, x) / (2 ** (nu - 1) * gamma_fn(nu))
            lag = np.abs(grids[i][:, None] - grids[j][None, :])
            temporal = np.exp(-phi_t * lag).mean()
            out[i, j] = out[j, i] = spatial * temporal
    return out


def mc_polygon_area(vertices, n_samples, seed):
    """Rejection-sampling area estimate; returns (area, standard error)."""
    import matplotlib.path as mpath

    v = np.asarray(vertices, dtype=float)
    lo, hi = v.min(axis=0), v.max(axis=0)
    box_area = float(np.prod(hi - lo))
    rng = np.random.default_rng(seed)
    pts = lo + rng.random((n_samples, 2)) * (hi - lo)
    hit = mpath.Path(v).contains_points(pts)
    p = hit.mean()
    return box_area * p, box_area * np.sqrt(p * (1 - p) / n_samples)


def simplex_grid_search(dens, resolution=1e-3):
    """Best stacking objective over a simplex grid (G <= 3); the slow oracle."""
    n, g = dens.shape
    steps = int(round(1.0 / resolution))
    best = -np.inf
    if g == 1:
        return float(np.log(dens[:, 0]).mean())
    if g == 2:
        a = np.linspace(0.0, 1.0, steps + 1)
        weights = np.column_stack([a, 1.0 - a])
        vals = np.log(dens @ weights.T).mean(axis=0)
        return float(vals.max())
    if g != 3:
        raise ValueError("grid oracle only supports G <= 3")
    for i in range(steps + 1):
        a = i * resolution
        b = np.linspace(0.0, 1.0 - a, steps + 1 - i)
        weights = np.column_stack([np.full_like(b, a), b, 1.0 - a - b])
        vals = np.log(dens @ weights.T).mean(axis=0)
        best = max(best, float(vals.max()))
    return best


def dense_loo_logpdf(x, basis, cov, d_tilde, delta2, priors, j):
    """Leave-one-out log density by direct dense linear algebra (refit route)."""
    from scipy.stats import t as t_dist

    n = len(x)
    keep = [i for i in range(n) if i != j]
    v_x = cov + delta2 * np.diag(d_tilde)
    v_rest = v_x[np.ix_(keep, keep)]
    v_inv = np.linalg.inv(v_rest)
    x_rest = x[keep]
    b_rest = basis[keep]
    vg_inv = np.linalg.inv(priors.v_gamma)
    mg_inv = b_rest.T @ v_inv @ b_rest + vg_inv
    mg_vec = b_rest.T @ v_inv @ x_rest + vg_inv @ priors.mu_gamma
    mg = np.linalg.inv(mg_inv)
    gamma_hat = mg @ mg_vec
    r = v_x[keep, j]
    h = basis[j] - b_rest.T @ v_inv @ r
    a_star = priors.a_sigma + (n - 1) / 2.0
    b_star = priors.b_sigma + 0.5 * (x_rest @ v_inv @ x_rest
                                     + priors.mu_gamma @ vg_inv @ priors.mu_gamma
                                     - mg_vec @ gamma_hat)
    loc = r @ v_inv @ x_rest + h @ gamma_hat
    scale2 = (b_star / a_star) * (v_x[j, j] - r @ v_inv @ r + h @ mg @ h)
    return float(t_dist.logpdf(x[j], df=2 * a_star, loc=loc, scale=np.sqrt(scale2)))
