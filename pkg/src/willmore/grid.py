"""Periodic-grid calculus on the parameter torus R^2/Z^2.

Fields are plain numpy arrays sampled on a uniform doubly periodic grid:
scalar fields have shape (n_u, n_v), ambient vector fields (n_u, n_v, n),
and symmetric 2-tensor fields (n_u, n_v, 2, 2).  Axis 0 is the u direction,
axis 1 the v direction, with spacings h_u = 1/n_u and h_v = 1/n_v.

Two derivative lanes coexist:

* ``partial`` / ``partial2``: centered periodic finite differences of order
  ``fd_order`` (2 or 4).  Used by the curvature pipeline, where refinement
  studies need a clean O(h^p) error.
* ``spectral_partial``: exact differentiation of the trigonometric
  interpolant via FFT.  Used by the uniformization/Teichmueller machinery,
  where integral identities have to hold to near solver precision.

The elliptic solves (``poisson_solve``, ``vector_poisson_solve``) invert the
flat Laplacian and the flat conformal-Killing operator exactly per Fourier
mode; both are only solvable on the orthogonal complement of the constants,
which the callers must respect.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridSpec",
    "GridError",
    "partial",
    "partial2",
    "spectral_partial",
    "spectral_lowpass",
    "integrate",
    "poisson_solve",
    "vector_poisson_solve",
]


class GridError(ValueError):
    """Raised for ill-posed grid operations (degenerate data, bad RHS)."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on the unit parameter torus."""

    n_u: int
    n_v: int
    fd_order: int = 4

    def __post_init__(self):
        if self.n_u < 8 or self.n_v < 8:
            raise GridError(f"grid must be at least 8x8, got {self.n_u}x{self.n_v}")
        if self.fd_order not in (2, 4):
            raise GridError(f"fd_order must be 2 or 4, got {self.fd_order}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_u, self.n_v)

    @property
    def h_u(self) -> float:
        return 1.0 / self.n_u

    @property
    def h_v(self) -> float:
        return 1.0 / self.n_v

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """1D sample coordinates along u and v."""
        u = np.arange(self.n_u) * self.h_u
        v = np.arange(self.n_v) * self.h_v
        return u, v

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """2D meshgrid (u, v) with ij indexing."""
        u, v = self.axes()
        return np.meshgrid(u, v, indexing="ij")

    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer Fourier frequencies along each axis (fftfreq convention)."""
        ku = np.fft.fftfreq(self.n_u, d=1.0 / self.n_u)
        kv = np.fft.fftfreq(self.n_v, d=1.0 / self.n_v)
        return ku, kv


def _axis_of(direction: str) -> int:
    if direction == "u":
        return 0
    if direction == "v":
        return 1
    raise GridError(f"direction must be 'u' or 'v', got {direction!r}")


def _check_shape(field: np.ndarray, grid: GridSpec):
    if field.shape[:2] != grid.shape:
        raise GridError(
            f"field shape {field.shape} does not match grid {grid.shape}"
        )


def partial(field: np.ndarray, direction: str, grid: GridSpec) -> np.ndarray:
    """Centered periodic finite difference of order grid.fd_order.

    Works for scalar, vector and tensor fields (differentiation is along the
    leading grid axes; trailing component axes ride along).
    """
    _check_shape(field, grid)
    ax = _axis_of(direction)
    h = grid.h_u if ax == 0 else grid.h_v
    d1 = np.roll(field, -1, axis=ax) - np.roll(field, 1, axis=ax)
    if grid.fd_order == 2:
        return d1 / (2.0 * h)
    d2 = np.roll(field, -2, axis=ax) - np.roll(field, 2, axis=ax)
    return (8.0 * d1 - d2) / (12.0 * h)


def partial2(field: np.ndarray, direction: str, grid: GridSpec) -> np.ndarray:
    """Pure second derivative, centered periodic stencil of order fd_order."""
    _check_shape(field, grid)
    ax = _axis_of(direction)
    h = grid.h_u if ax == 0 else grid.h_v
    s1 = np.roll(field, -1, axis=ax) - 2.0 * field + np.roll(field, 1, axis=ax)
    if grid.fd_order == 2:
        return s1 / (h * h)
    s2 = np.roll(field, -2, axis=ax) - 2.0 * field + np.roll(field, 2, axis=ax)
    return (16.0 * s1 - s2) / (12.0 * h * h)


def spectral_partial(field: np.ndarray, direction: str, grid: GridSpec) -> np.ndarray:
    """Derivative of the trigonometric interpolant (exact below Nyquist).

    The Nyquist mode is zeroed: an odd-order derivative of the real
    interpolant has no consistent real representation there.
    """
    _check_shape(field, grid)
    ax = _axis_of(direction)
    n = grid.n_u if ax == 0 else grid.n_v
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        k = k.copy()
        k[n // 2] = 0.0
    shape = [1] * field.ndim
    shape[ax] = n
    mult = (2j * np.pi * k).reshape(shape)
    return np.real(np.fft.ifft(mult * np.fft.fft(field, axis=ax), axis=ax))


def spectral_lowpass(field: np.ndarray, grid: GridSpec, cutoff: float, order: int = 16) -> np.ndarray:
    """Sharp spectral low-pass exp(-(|k|/cutoff)^order) along the grid axes."""
    _check_shape(field, grid)
    ku = np.fft.fftfreq(grid.n_u, d=1.0 / grid.n_u)
    kv = np.fft.fftfreq(grid.n_v, d=1.0 / grid.n_v)
    kabs = np.sqrt(ku[:, None] ** 2 + kv[None, :] ** 2)
    mult = np.exp(-((kabs / cutoff) ** order))
    shape = mult.shape + (1,) * (field.ndim - 2)
    out = np.fft.ifft2(
        mult.reshape(shape) * np.fft.fft2(field, axes=(0, 1)), axes=(0, 1)
    )
    return np.real(out)


def spectral_resample(field: np.ndarray, grid: GridSpec, new_grid: GridSpec) -> np.ndarray:
    """Resample a periodic field onto another grid via its Fourier series.

    Exact for band-limited data; modes are zero-padded or truncated to the
    target resolution.
    """
    _check_shape(field, grid)
    f_hat = np.fft.fft2(field, axes=(0, 1))
    n_u, n_v = grid.shape
    m_u, m_v = new_grid.shape
    out_hat = np.zeros((m_u, m_v) + field.shape[2:], dtype=complex)

    def copy_band(n_src, n_dst):
        half = min(n_src, n_dst) // 2
        src = list(range(0, half + 1)) + list(range(n_src - half + (n_src % 2 == 0), n_src))
        dst = list(range(0, half + 1)) + list(range(n_dst - half + (n_src % 2 == 0), n_dst))
        k = min(len(src), len(dst))
        return src[:k], dst[:k]

    su, du = copy_band(n_u, m_u)
    sv, dv = copy_band(n_v, m_v)
    out_hat[np.ix_(du, dv)] = f_hat[np.ix_(su, sv)]
    out = np.fft.ifft2(out_hat, axes=(0, 1)).real * (m_u * m_v) / (n_u * n_v)
    return out


def integrate(field: np.ndarray, area_density: np.ndarray | float, grid: GridSpec) -> float:
    """Integral over the torus: sum(field * density) * h_u * h_v.

    The trapezoid rule degenerates to a plain scaled sum on a periodic grid,
    which is exact for trigonometric polynomials below the Nyquist frequency.
    """
    _check_shape(np.asarray(field), grid)
    ad = np.asarray(area_density, dtype=float)
    if ad.ndim == 0:
        if ad <= 0.0:
            raise GridError("degenerate area element")
        total = ad * np.sum(field)
    else:
        _check_shape(ad, grid)
        if np.any(ad <= 0.0):
            raise GridError("degenerate area element")
        total = np.sum(field * ad)
    return float(total) * grid.h_u * grid.h_v


def poisson_solve(rhs: np.ndarray, grid: GridSpec, mean_tol: float = 1e-8) -> np.ndarray:
    """Solve the flat Poisson equation Delta u = rhs, exactly per Fourier mode.

    Returns the unique zero-mean solution.  The closed torus imposes the
    solvability condition mean(rhs) = 0; violations beyond ``mean_tol``
    (relative to the field scale) are rejected.
    """
    _check_shape(rhs, grid)
    scale = max(1.0, float(np.max(np.abs(rhs))) if rhs.size else 1.0)
    mean = float(np.mean(rhs))
    if abs(mean) > mean_tol * scale:
        raise GridError(
            f"incompatible right-hand side: mean {mean:.3e} exceeds tolerance"
        )
    ku, kv = grid.wavenumbers()
    k2 = (ku[:, None] ** 2 + kv[None, :] ** 2) * (2.0 * np.pi) ** 2
    rhs_hat = np.fft.fft2(rhs - mean)
    with np.errstate(divide="ignore", invalid="ignore"):
        u_hat = np.where(k2 > 0.0, -rhs_hat / k2, 0.0)
    u = np.real(np.fft.ifft2(u_hat))
    return u - np.mean(u)


def vector_poisson_solve(
    rhs: np.ndarray,
    grid: GridSpec,
    background: np.ndarray | None = None,
    tol: float = 1e-8,
) -> np.ndarray:
    """Invert the trace-free symmetrized gradient on the flat torus.

    Finds the zero-mean covector field X with

        d_i X_j + d_j X_i - G_ij G^{kl} d_k X_l = rhs_ij

    where G is a constant SPD background metric (identity by default).  The
    right-hand side must be a symmetric, G-trace-free tensor field with zero
    mean: constant trace-free tensors are L2-orthogonal to the range of the
    operator, so the caller has to strip them off first.
    """
    _check_shape(rhs, grid)
    if rhs.shape[2:] != (2, 2):
        raise GridError(f"expected (n_u, n_v, 2, 2) tensor field, got {rhs.shape}")
    G = np.eye(2) if background is None else np.asarray(background, dtype=float)
    if G.shape != (2, 2) or abs(G[0, 1] - G[1, 0]) > 1e-14 or np.linalg.det(G) <= 0:
        raise GridError("background must be a constant symmetric positive matrix")
    Ginv = np.linalg.inv(G)

    scale = max(1.0, float(np.max(np.abs(rhs))))
    asym = float(np.max(np.abs(rhs[..., 0, 1] - rhs[..., 1, 0])))
    if asym > tol * scale:
        raise GridError("right-hand side is not symmetric")
    tr = np.einsum("ij,xyij->xy", Ginv, rhs)
    if float(np.max(np.abs(tr))) > tol * scale * 10.0:
        raise GridError("right-hand side is not trace-free w.r.t. background")
    means = rhs.mean(axis=(0, 1))
    if float(np.max(np.abs(means))) > tol * scale:
        raise GridError(
            "right-hand side has a constant trace-free component; "
            "remove the mean before solving"
        )

    ku, kv = grid.wavenumbers()
    K1 = np.broadcast_to(ku[:, None], grid.shape)
    K2 = np.broadcast_to(kv[None, :], grid.shape)

    # Per-mode 2x2 system in (X1_hat, X2_hat) for components T11, T12.
    # T_ij = 2*pi*i * (k_i X_j + k_j X_i - G_ij G^{kl} k_k X_l)
    c1 = Ginv[0, 0] * K1 + Ginv[0, 1] * K2  # G^{1l} k_l
    c2 = Ginv[1, 0] * K1 + Ginv[1, 1] * K2  # G^{2l} k_l
    M = np.empty(grid.shape + (2, 2))
    M[..., 0, 0] = 2.0 * K1 - G[0, 0] * c1
    M[..., 0, 1] = -G[0, 0] * c2
    M[..., 1, 0] = K2 - G[0, 1] * c1
    M[..., 1, 1] = K1 - G[0, 1] * c2

    r_hat = np.stack(
        [np.fft.fft2(rhs[..., 0, 0]), np.fft.fft2(rhs[..., 0, 1])], axis=-1
    )
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    nonzero = (K1 != 0) | (K2 != 0)
    if np.any(np.abs(det[nonzero]) < 1e-12):
        raise GridError("singular mode system in vector Poisson solve")
    det_safe = np.where(nonzero, det, 1.0)
    X1_hat = (M[..., 1, 1] * r_hat[..., 0] - M[..., 0, 1] * r_hat[..., 1]) / det_safe
    X2_hat = (-M[..., 1, 0] * r_hat[..., 0] + M[..., 0, 0] * r_hat[..., 1]) / det_safe
    X1_hat = np.where(nonzero, X1_hat, 0.0) / (2j * np.pi)
    X2_hat = np.where(nonzero, X2_hat, 0.0) / (2j * np.pi)

    X = np.stack(
        [np.real(np.fft.ifft2(X1_hat)), np.real(np.fft.ifft2(X2_hat))], axis=-1
    )
    return X - X.mean(axis=(0, 1))
