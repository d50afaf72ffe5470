import numpy as np
import pytest

from ergokit import kernelgrid, model, norms
from ergokit.grid import Grid
from ergokit.kernelgrid import GridKernel, GridTooSmallError, IllPosedClusterError, NoDensityError


def test_row_sums_before_normalisation(ar1):
    K = kernelgrid.discretize(ar1, (-8.0, 8.0, 201), normalize=False)
    # at |x| <= 4 the conditional mean sits 6 sigma inside the box
    inner = np.abs(K.nodes[:, 0]) <= 4
    rows = K.matrix.sum(axis=1)[inner]
    assert np.all(rows >= 1 - 1e-8) and np.all(rows <= 1 + 1e-8)


def test_leak_test_rejects_narrow_grid(ar1):
    with pytest.raises(GridTooSmallError) as info:
        kernelgrid.discretize(ar1, (-6.0, 6.0, 201))
    assert info.value.leak > 1e-8


def test_stationary_variance(ar1_kernel):
    x = ar1_kernel.nodes[:, 0]
    pi = ar1_kernel.stationary
    assert pi.sum() == pytest.approx(1.0, abs=1e-12)
    assert abs(pi @ x**2 - 4 / 3) <= 1e-3
    np.testing.assert_allclose(pi @ ar1_kernel.matrix, pi, atol=1e-14)


def test_no_density_rejected():
    det = model.ModelSpec("det", 1, 1, lambda x, n: 0.5 * x, lambda x, n: np.full(
        np.shape(x)[:-1] + (1, 1), 0.5), model.NoiseLaw())
    with pytest.raises(NoDensityError):
        kernelgrid.discretize(det, (-8.0, 8.0, 101))


def test_two_step_kernel_is_square(ar1):
    K1 = kernelgrid.discretize(ar1, (-8.0, 8.0, 401))
    K2 = kernelgrid.discretize(ar1, (-8.0, 8.0, 401), steps=2)
    inner = np.abs(K1.nodes[:, 0]) <= 4
    assert np.max(np.abs(K1.matrix @ K1.matrix - K2.matrix)[inner]) < 1e-5


def test_rotcon2_kernel(rotcon2):
    K = kernelgrid.discretize(rotcon2, Grid.uniform(-8.0, 8.0, 41, 2))
    assert K.size == 41**2
    np.testing.assert_allclose(K.matrix.sum(axis=1), 1.0, atol=1e-12)
    cov = (K.stationary[:, None] * K.nodes).T @ K.nodes
    np.testing.assert_allclose(cov, np.eye(2) * 4 / 3, atol=0.02)


def test_cutoff_profile():
    chi = kernelgrid.smooth_cutoff(2)
    r = np.array([-2.0, 0.0, 1.5, 2.0])
    assert chi.profile(r).tolist() == [1.0, 1.0, 1.0, 1.0]
    assert chi.profile(np.array([3.0, -3.0, 10.0])).tolist() == [0.0, 0.0, 0.0]
    assert chi.profile(2.5) == pytest.approx(0.5, abs=1e-15)
    assert abs(chi.profile_derivative(2.5)) == pytest.approx(1.5, abs=1e-15)
    fine = np.linspace(-4, 4, 100_001)
    assert np.max(np.abs(chi.profile_derivative(fine))) == pytest.approx(1.5, abs=1e-8)


def test_cutoff_product_and_gradient():
    chi = kernelgrid.smooth_cutoff(1)
    x = np.array([[1.5, 0.2], [0.3, 1.8], [2.5, 0.0]])
    np.testing.assert_allclose(chi(x), [0.5, chi.profile(1.8), 0.0])
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (chi(x + e) - chi(x - e)) / (2 * h)
        np.testing.assert_allclose(chi.grad(x)[:, i], fd, atol=1e-8)
    with pytest.raises(ValueError):
        kernelgrid.smooth_cutoff(-1)


def test_truncate_beyond_extent(ar1_kernel):
    T = kernelgrid.truncate_kernel(ar1_kernel, 9, 9)
    assert np.array_equal(T.matrix, ar1_kernel.matrix) and T.signed
    assert kernelgrid.truncation_error(ar1_kernel, 9, 9) == (0.0, 0.0)


def test_truncate_at_zero(ar1_kernel):
    T = kernelgrid.truncate_kernel(ar1_kernel, 0, 0)
    far = np.abs(ar1_kernel.nodes[:, 0]) >= 1
    assert np.all(T.matrix[far] == 0.0) and np.all(T.matrix[:, far] == 0.0)


def test_truncation_error_decreasing(ar1_kernel, weight):
    errs = [kernelgrid.truncation_error(ar1_kernel, n, n, weight) for n in (2, 3, 4, 5, 6)]
    ev = [e[0] for e in errs]
    ev1 = [e[1] for e in errs]
    assert all(b < a for a, b in zip(ev, ev[1:]))
    assert all(b / a < 1 for a, b in zip(ev1[:4], ev1[1:5]))
    assert all(e0 <= e1 for e0, e1 in errs)


def test_truncation_error_matches_tail_ratio(ar1_kernel, weight):
    # rows beyond n + 1 keep all of P, so err_v >= sup_{|x| >= n+1} Pv(x)/v(x)
    x = ar1_kernel.nodes[:, 0]
    ratio = np.exp(-0.06875 * x**2) / np.sqrt(0.8)
    for n in (3, 5):
        err_v, _ = kernelgrid.truncation_error(ar1_kernel, n, n, weight)
        assert err_v >= ratio[np.abs(x) >= n + 1].max() * (1 - 1e-3)


def test_spectrum_ar1(ar1_kernel, ar1_kernel_coarse):
    fine = kernelgrid.spectrum_and_radius(ar1_kernel, top_k=4)
    coarse = kernelgrid.spectrum_and_radius(ar1_kernel_coarse, top_k=4)
    target = np.array([1.0, 0.5, 0.25, 0.125])
    assert np.max(np.abs(np.abs(fine.eigenvalues) - target)) <= 1e-3
    assert np.max(np.abs(np.abs(fine.eigenvalues) - np.abs(coarse.eigenvalues))) <= 2e-3


def test_spectrum_centered(ar1_kernel):
    rep = kernelgrid.spectrum_and_radius(kernelgrid.center_kernel(ar1_kernel))
    assert abs(rep.xi_v - 0.5) <= 1e-3
    assert rep.agreement <= 0.02


def test_spectrum_identity():
    rep = kernelgrid.spectrum_and_radius(np.eye(6))
    assert np.all(rep.eigenvalues == 1.0) and rep.xi_v == 1.0 and rep.xi_power == 1.0


def test_spectrum_rejects_non_square():
    with pytest.raises(ValueError):
        kernelgrid.spectrum_and_radius(np.ones((2, 3)))


def test_projection_perron(ar1_kernel_coarse):
    K = ar1_kernel_coarse
    rank, Pi = kernelgrid.spectral_projection(K, 1.0, 0.1)
    assert rank == 1
    assert np.max(np.abs(Pi - np.outer(np.ones(K.size), K.stationary))) < 1e-8


def test_projection_second_eigenvalue(ar1_kernel_coarse):
    rank, Pi = kernelgrid.spectral_projection(ar1_kernel_coarse, 0.5, 0.1)
    assert rank == 1
    assert np.max(np.abs(Pi @ Pi - Pi)) < 1e-8
    np.testing.assert_allclose(ar1_kernel_coarse.matrix @ Pi, 0.5 * Pi, atol=1e-6)


def test_projection_empty_and_boundary(ar1_kernel_coarse):
    rank, Pi = kernelgrid.spectral_projection(ar1_kernel_coarse, 3.0, 0.5)
    assert rank == 0 and not Pi.any()
    with pytest.raises(IllPosedClusterError):
        kernelgrid.spectral_projection(np.diag([1.0, 0.5]), 0.75, 0.25)


def test_centered_kernel(ar1_kernel):
    Kc = kernelgrid.center_kernel(ar1_kernel)
    assert np.max(np.abs(Kc.matrix.sum(axis=1))) < 1e-10
    assert np.max(np.abs(Kc.matrix @ np.full(Kc.size, 2.0))) < 1e-10
    x = ar1_kernel.nodes[:, 0]
    inner = np.abs(x) <= 4
    f = x.copy()
    for t in range(1, 6):
        f = Kc.matrix @ f
        np.testing.assert_allclose(f[inner], 0.5**t * x[inner], atol=1e-8)


def test_finite_rank_rank_bound(ar1_kernel, weight):
    T, _ = kernelgrid.finite_rank_approx(ar1_kernel, weight, 8, 4)
    assert T.rank <= 9
    g = np.sin(ar1_kernel.nodes[:, 0])
    np.testing.assert_allclose(T.apply(g), T.dense() @ g, atol=1e-12)


def test_finite_rank_error_decreasing(ar1_kernel, weight):
    errs = [kernelgrid.finite_rank_approx(ar1_kernel, weight, m, 4)[1] for m in (8, 16, 32, 64)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_finite_rank_constant_density():
    # a constant density with v = 1 is reproduced exactly by the degree-1 fit
    grid = Grid.uniform(-3.0, 3.0, 121)

    def density(x, y):
        return np.full(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]), 1 / 6)

    mat = density(grid.nodes[:, None, :], grid.nodes[None, :, :]) * grid.weights[None, :]
    K = GridKernel(grid, mat, density=density)
    T, err = kernelgrid.finite_rank_approx(K, norms.unit_weight(), 1, 1)
    assert T.rank == 2
    assert err < 1e-12
