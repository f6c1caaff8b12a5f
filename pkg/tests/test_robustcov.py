import numpy as np
import pytest

from mvdenoise.robustcov import (
    CovarianceMatrix,
    SingularCovarianceError,
    eigen,
    mcd_estimate,
    sample_covariance,
)


def test_sample_covariance_hand_example():
    # two orthogonal unit rows: X^T X / (n - 1) = I
    cov = sample_covariance(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert np.allclose(cov.sigma, np.eye(2), atol=1e-15)


def test_sample_covariance_identical_rows_singular():
    with pytest.raises(SingularCovarianceError):
        sample_covariance(np.array([[1.0, 2.0]] * 5))


def test_sample_covariance_scaling_homogeneity():
    x = np.random.default_rng(0).standard_normal((50, 3))
    a = sample_covariance(x).sigma
    b = sample_covariance(3.0 * x).sigma
    assert np.allclose(b, 9.0 * a, rtol=1e-12)


def test_quadratic_form_matches_explicit_inverse():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((6, 6))
    cov = CovarianceMatrix.from_matrix(a @ a.T + 6 * np.eye(6))
    v = rng.standard_normal((20, 6))
    direct = np.einsum("ni,ij,nj->n", v, np.linalg.inv(cov.sigma), v)
    assert np.abs(cov.quadratic_form(v) - direct).max() < 1e-10
    assert np.allclose(cov.inverse(), np.linalg.inv(cov.sigma), atol=1e-10)


def test_quadratic_form_positive_definite():
    cov = CovarianceMatrix.from_matrix([[2.0, 0.5], [0.5, 1.0]])
    v = np.random.default_rng(2).standard_normal((100, 2))
    q = cov.quadratic_form(v)
    assert (q > 0).all()
    assert cov.quadratic_form(np.zeros(2))[0] == 0.0


def test_eigen_identity_and_diagonal():
    w, b = eigen(np.eye(3))
    assert np.allclose(w, 1.0)
    assert np.allclose(b.T @ b, np.eye(3), atol=1e-10)
    w, _ = eigen(np.diag([4.0, 1.0]))
    assert np.allclose(w, [4.0, 1.0])
    assert np.allclose(1.0 / w, [0.25, 1.0])


def test_eigen_reconstructs_random_spd():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((5, 5))
    sigma = a @ a.T + 5 * np.eye(5)
    w, b = eigen(sigma)
    assert np.abs(b @ np.diag(w) @ b.T - sigma).max() < 1e-10
    assert np.abs(b.T @ sigma @ b - np.diag(w)).max() < 1e-10
    assert np.abs(b.T @ b - np.eye(5)).max() < 1e-10
    assert (np.diff(w) <= 0).all()


def test_eigen_rejects_asymmetric():
    with pytest.raises(ValueError, match="symmetric"):
        eigen(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_mcd_clean_gaussian_close_to_identity():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((1000, 2))
    est = mcd_estimate(x, np.random.default_rng(5))
    assert np.linalg.norm(est.sigma - np.eye(2)) < 0.15
    # and close to the non-robust oracle on the same data
    assert np.linalg.norm(est.sigma - sample_covariance(x).sigma) < 0.15


def test_mcd_resists_gross_outliers():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((2000, 2))
    idx = rng.choice(2000, size=400, replace=False)
    contaminated = x.copy()
    contaminated[idx] = 100.0 * rng.standard_normal((400, 2))
    keep = np.ones(2000, dtype=bool)
    keep[idx] = False
    clean_cov = x[keep].T @ x[keep] / keep.sum()
    est = mcd_estimate(contaminated, np.random.default_rng(7))
    assert np.linalg.norm(est.sigma - clean_cov) < 0.25


@pytest.mark.parametrize("frac", [0.1, 0.2, 0.3])
def test_mcd_breakdown_range(frac):
    rng = np.random.default_rng(int(frac * 100))
    n = 1500
    x = rng.standard_normal((n, 2))
    k = int(frac * n)
    contaminated = x.copy()
    contaminated[:k] = 50.0 * rng.standard_normal((k, 2)) + 20.0
    est = mcd_estimate(contaminated, np.random.default_rng(8))
    clean_cov = x[k:].T @ x[k:] / (n - k)
    assert np.linalg.norm(est.sigma - clean_cov) < 0.3


def test_mcd_scalar_case_nondegenerate():
    x = np.array([-1.0, 1.0] * 4)[:, None]
    est = mcd_estimate(x, np.random.default_rng(9))
    assert est.sigma[0, 0] > 0


def test_mcd_deterministic_given_seed():
    x = np.random.default_rng(10).standard_normal((500, 3))
    a = mcd_estimate(x, np.random.default_rng(42)).sigma
    b = mcd_estimate(x, np.random.default_rng(42)).sigma
    assert np.array_equal(a, b)


def test_mcd_sample_size_floor():
    with pytest.raises(ValueError, match="at least"):
        mcd_estimate(np.random.default_rng(0).standard_normal((5, 2)), np.random.default_rng(0))


def test_mcd_rank_deficient_rejected():
    x = np.random.default_rng(0).standard_normal((100, 1)) @ np.array([[1.0, 2.0]])
    with pytest.raises(SingularCovarianceError):
        mcd_estimate(x, np.random.default_rng(0))


@pytest.mark.parametrize("n,limit", [(500, 0.25), (2000, 0.15), (8000, 0.08)])
def test_mcd_converges_to_sample_covariance(n, limit):
    # agreement with the non-robust estimate tightens as n grows
    dists = []
    for seed in range(5):
        x = np.random.default_rng([n, seed]).standard_normal((n, 2))
        est = mcd_estimate(x, np.random.default_rng([n, seed, 1]))
        dists.append(np.linalg.norm(est.sigma - sample_covariance(x).sigma))
    assert max(dists) < limit
