import numpy as np
import pytest

from willmore.grid import (
    GridError,
    GridSpec,
    integrate,
    partial,
    partial2,
    poisson_solve,
    spectral_lowpass,
    spectral_partial,
    spectral_resample,
    vector_poisson_solve,
)
from willmore.surfaces import random_smooth_scalar


@pytest.fixture
def grid():
    return GridSpec(64, 64)


def test_grid_spec_validation():
    with pytest.raises(GridError):
        GridSpec(4, 64)
    with pytest.raises(GridError):
        GridSpec(64, 64, fd_order=3)
    assert GridSpec(64, 32).h_u == 1.0 / 64


def test_partial_constant_is_zero(grid):
    c = np.full(grid.shape, 2.7)
    assert np.all(partial(c, "u", grid) == 0.0)
    assert np.all(partial(c, "v", grid) == 0.0)


@pytest.mark.parametrize("order,expected_rate", [(2, 2.0), (4, 4.0)])
def test_partial_convergence_order(order, expected_rate):
    errs = []
    for n in (64, 128):
        spec = GridSpec(n, n, fd_order=order)
        u, _ = spec.mesh()
        d = partial(np.sin(2 * np.pi * u), "u", spec)
        errs.append(np.abs(d - 2 * np.pi * np.cos(2 * np.pi * u)).max())
    rate = np.log2(errs[0] / errs[1])
    assert rate > expected_rate - 0.2


def test_partial2_matches_analytic(grid):
    u, v = grid.mesh()
    f = np.cos(2 * np.pi * v)
    d2 = partial2(f, "v", grid)
    assert np.abs(d2 + (2 * np.pi) ** 2 * f).max() < 1e-3


def test_spectral_partial_exact_below_nyquist(grid):
    u, v = grid.mesh()
    f = np.sin(2 * np.pi * (5 * u - 3 * v))
    d = spectral_partial(f, "u", grid)
    assert np.abs(d - 10 * np.pi * np.cos(2 * np.pi * (5 * u - 3 * v))).max() < 1e-10


def test_periodicity_shift_identity(grid):
    phi = random_smooth_scalar(grid, 3)
    rolled = np.roll(phi, (grid.n_u, grid.n_v), axis=(0, 1))
    assert np.array_equal(rolled, phi)


def test_integrate_unit(grid):
    assert integrate(np.ones(grid.shape), 1.0, grid) == pytest.approx(1.0)


def test_integrate_periodic_mode_exact(grid):
    u, _ = grid.mesh()
    assert abs(integrate(np.sin(2 * np.pi * u), 1.0, grid)) < 1e-14


def test_integrate_constant_metric_area(grid):
    density = np.full(grid.shape, np.sqrt(4.0 * 1.0))  # det diag(4, 1)
    assert integrate(np.ones(grid.shape), density, grid) == pytest.approx(2.0)


def test_integrate_rejects_degenerate_density(grid):
    bad = np.ones(grid.shape)
    bad[3, 5] = 0.0
    with pytest.raises(GridError, match="degenerate area element"):
        integrate(np.ones(grid.shape), bad, grid)


def test_summation_by_parts(grid):
    phi = random_smooth_scalar(grid, 11)
    assert abs(integrate(partial(phi, "u", grid), 1.0, grid)) < 1e-13
    assert abs(integrate(spectral_partial(phi, "v", grid), 1.0, grid)) < 1e-13


def test_poisson_zero(grid):
    assert np.all(poisson_solve(np.zeros(grid.shape), grid) == 0.0)


def test_poisson_single_mode(grid):
    u, _ = grid.mesh()
    rhs = -((2 * np.pi) ** 2) * np.sin(2 * np.pi * u)
    sol = poisson_solve(rhs, grid)
    assert np.abs(sol - np.sin(2 * np.pi * u)).max() < 1e-12


def test_poisson_nonzero_mean_rejected(grid):
    with pytest.raises(GridError, match="incompatible right-hand side"):
        poisson_solve(np.full(grid.shape, 0.1), grid)


def test_poisson_inverts_laplacian(grid):
    phi = random_smooth_scalar(grid, 5)
    phi -= phi.mean()
    lap = spectral_partial(spectral_partial(phi, "u", grid), "u", grid) + spectral_partial(
        spectral_partial(phi, "v", grid), "v", grid
    )
    assert np.abs(poisson_solve(lap, grid) - phi).max() < 1e-11


def _tracefree_sym_grad(X, grid, G=np.eye(2)):
    Ginv = np.linalg.inv(G)
    X_cov = np.einsum("ij,xyj->xyi", G, X)
    dX = np.stack(
        [spectral_partial(X_cov, "u", grid), spectral_partial(X_cov, "v", grid)], axis=2
    )
    sym = dX + np.swapaxes(dX, 2, 3)
    tr = np.einsum("ij,xyij->xy", Ginv, sym)
    return sym - 0.5 * tr[..., None, None] * G


def test_vector_poisson_zero(grid):
    assert np.all(vector_poisson_solve(np.zeros(grid.shape + (2, 2)), grid) == 0.0)


def test_vector_poisson_round_trip(grid):
    _, v = grid.mesh()
    X0 = np.stack([np.sin(2 * np.pi * v), np.zeros(grid.shape)], axis=-1)
    rhs = _tracefree_sym_grad(X0, grid)
    X = vector_poisson_solve(rhs, grid)
    # solver returns the covector field; identity background makes them equal
    assert np.abs(X - X0).max() < 1e-12


def test_vector_poisson_general_background_round_trip(grid):
    G = np.array([[2.0, 0.6], [0.6, 1.2]])
    X0 = np.stack(
        [random_smooth_scalar(grid, 21, rms=0.5), random_smooth_scalar(grid, 22, rms=0.5)],
        axis=-1,
    )
    X0 -= X0.mean(axis=(0, 1))
    rhs = _tracefree_sym_grad(X0, grid, G)
    X_cov = vector_poisson_solve(rhs, grid, background=G)
    X = np.einsum("ij,xyj->xyi", np.linalg.inv(G), X_cov)
    assert np.abs(X - X0).max() < 1e-10


def test_vector_poisson_rejects_constant_tt(grid):
    rhs = np.broadcast_to(np.array([[0.3, 0.1], [0.1, -0.3]]), grid.shape + (2, 2)).copy()
    with pytest.raises(GridError, match="constant trace-free component"):
        vector_poisson_solve(rhs, grid)


def test_determinism(grid):
    phi = random_smooth_scalar(grid, 9)
    a = poisson_solve(phi - phi.mean(), grid)
    b = poisson_solve(phi - phi.mean(), grid)
    assert np.array_equal(a, b)


def test_spectral_resample_band_limited_exact():
    g64, g128 = GridSpec(64, 64), GridSpec(128, 128)
    u, v = g64.mesh()
    f = np.sin(2 * np.pi * (3 * u - 2 * v))
    up = spectral_resample(f, g64, g128)
    U, V = g128.mesh()
    assert np.abs(up - np.sin(2 * np.pi * (3 * U - 2 * V))).max() < 1e-12
    back = spectral_resample(up, g128, g64)
    assert np.abs(back - f).max() < 1e-12


def test_spectral_lowpass_removes_high_modes(grid):
    u, v = grid.mesh()
    f = np.sin(2 * np.pi * u) + 0.5 * np.sin(2 * np.pi * 20 * u)
    filtered = spectral_lowpass(f, grid, cutoff=8.0)
    assert np.abs(filtered - np.sin(2 * np.pi * u)).max() < 1e-8
