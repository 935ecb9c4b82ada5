import numpy as np
import pytest

from gpstack.covariance import ProcessParams, SpaceTimePoint
from gpstack.model import BasisSpec, CandidateSpec, PointDataset, Priors


def make_toy_dataset(seed=7, n_sites=10, n_months=5, phi_s=1.0, nu=0.5, phi_t=0.3,
                     delta2=2.0, basis_kind="fourier"):
    """Small dataset drawn from the model itself (well-specified toy).

    Returns (PointDataset, CandidateSpec, Priors, latent z).
    """
    from gpstack.covariance import cov_point_point

    rng = np.random.default_rng(seed)
    sites = rng.random((n_sites, 2))
    pts = tuple(SpaceTimePoint(sites[i], (float(m), float(m + 1)))
                for i in range(n_sites) for m in range(n_months))
    n = len(pts)
    spec = CandidateSpec(ProcessParams(phi_s, nu, phi_t), delta2)
    if basis_kind == "fourier":
        basis_spec = BasisSpec("fourier", (12.0,))
        gamma_true = np.array([2.0, 0.5, -0.3])
    else:
        basis_spec = BasisSpec("monthly")
        gamma_true = np.zeros(12)
        gamma_true[0] = 2.0
    cov = cov_point_point(pts, spec.params)
    chol = np.linalg.cholesky(cov + 1e-10 * np.eye(n))
    from gpstack.model import basis_matrix_intervals

    basis = basis_matrix_intervals(basis_spec, [p.interval for p in pts])
    z = basis @ gamma_true + chol @ rng.standard_normal(n)
    lens = np.array([p.length for p in pts])
    x = z + np.sqrt(delta2 / lens) * rng.standard_normal(n)
    data = PointDataset(points=pts, x=x, basis_spec=basis_spec, basis=basis)
    return data, spec, Priors.default(basis_spec.r, 1), z


@pytest.fixture
def toy():
    return make_toy_dataset()


@pytest.fixture
def rng():
    return np.random.default_rng(0)
