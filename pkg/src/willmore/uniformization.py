"""Uniformization and Teichmueller projection of metrics on the grid torus.

Every smooth metric g on T^2 = R^2/Z^2 is e^{2u} times a flat metric; for
genus 1 the conformal factor solves the linear equation -Delta_g u = K_g.
The conformal class is encoded by the modulus tau (upper half-plane): we
compute the two harmonic 1-forms omega_k = dx_k + dh_k, combine them into a
holomorphic 1-form zeta = omega_1 + tau omega_2 by least squares against the
Hodge-star eigenvalue equation *zeta = -i zeta, and read tau off the period
matrix (periods of closed forms are torus averages of their components).

All derivatives in this module are spectral: harmonicity residuals and the
conformal invariance of the modulus then hold to solver precision, which the
variation formulas downstream depend on.

Conventions: the u-loop is the first homology generator.  A constant metric
G has modulus tau(G) = (G_12 + i sqrt(det G)) / G_11, and Im tau > 0 is
enforced by orientation choice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, integrate, spectral_partial

__all__ = [
    "UniformizationError",
    "TeichmullerPoint",
    "ConformalFactor",
    "ConformalStructure",
    "ModulusTracker",
    "metric_gauss_curvature",
    "conformal_factor",
    "conformal_structure",
    "modulus",
    "constant_metric_modulus",
    "constant_metric_from_tau",
    "teich_distance",
    "chart",
    "chart_inverse",
]


class UniformizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TeichmullerPoint:
    """Point of genus-1 Teichmueller space: modulus in the upper half-plane."""

    tau: complex

    def __post_init__(self):
        if not np.isfinite(self.tau.real) or not np.isfinite(self.tau.imag):
            raise UniformizationError("non-finite modulus")
        if self.tau.imag <= 0.0:
            raise UniformizationError(f"modulus must have Im tau > 0, got {self.tau}")


@dataclass
class ConformalFactor:
    """Conformal factor u and the unit-volume flat metric e^{-2u} g."""

    u: np.ndarray
    flat_metric: np.ndarray


@dataclass
class ConformalStructure:
    """Uniformization data of a metric: factor, harmonic forms, modulus.

    zeta is the holomorphic 1-form normalized to u-loop period 1 and v-loop
    period tau; star_sign records the orientation that makes Im tau > 0.
    """

    grid: GridSpec
    g: np.ndarray
    u: np.ndarray
    flat_metric: np.ndarray
    omega: np.ndarray          # (nu, nv, 2, 2): omega[..., k, :] components
    zeta: np.ndarray           # (nu, nv, 2) complex
    tau: complex
    star_sign: float
    holo_residual: float       # relative least-squares residual of *zeta = -i zeta

    @property
    def point(self) -> TeichmullerPoint:
        return TeichmullerPoint(self.tau)

    @property
    def lattice_map(self) -> np.ndarray:
        """P = [[1, Re tau], [0, Im tau]], grid lattice -> period lattice."""
        return np.array([[1.0, self.tau.real], [0.0, self.tau.imag]])

    @property
    def constant_metric(self) -> np.ndarray:
        """Unit-volume constant representative of the class, (1/Im tau) P^T P."""
        return constant_metric_from_tau(self.tau)


def _check_metric(g: np.ndarray, grid: GridSpec):
    if g.shape != grid.shape + (2, 2):
        raise UniformizationError(f"metric shape {g.shape} invalid for grid {grid.shape}")
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    if det.min() <= 0.0 or g[..., 0, 0].min() <= 0.0:
        raise UniformizationError("metric not positive definite")
    return det


def _metric_inverse(g: np.ndarray, det: np.ndarray) -> np.ndarray:
    ginv = np.empty_like(g)
    ginv[..., 0, 0] = g[..., 1, 1]
    ginv[..., 0, 1] = -g[..., 0, 1]
    ginv[..., 1, 0] = -g[..., 0, 1]
    ginv[..., 1, 1] = g[..., 0, 0]
    return ginv / det[..., None, None]


def metric_gauss_curvature(g: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Gauss curvature of a metric from its Levi-Civita connection.

    K = g_{1l} R^l_{212} / det g with the curvature tensor assembled from
    spectral derivatives of the Christoffel symbols.
    """
    det = _check_metric(g, grid)
    ginv = _metric_inverse(g, det)
    dg = np.stack(
        [spectral_partial(g, "u", grid), spectral_partial(g, "v", grid)], axis=2
    )  # (nu, nv, deriv, 2, 2)
    gam_low = 0.5 * (
        np.einsum("xyijl->xylij", dg)
        + np.einsum("xyjil->xylij", dg)
        - np.einsum("xylij->xylij", dg)
    )
    gam = np.einsum("xykl,xylij->xykij", ginv, gam_low)
    dgam_u = spectral_partial(gam, "u", grid)
    dgam_v = spectral_partial(gam, "v", grid)
    Rl = (
        dgam_u[..., :, 1, 1]
        - dgam_v[..., :, 0, 1]
        + np.einsum("xylm,xym->xyl", gam[..., :, 0, :], gam[..., :, 1, 1])
        - np.einsum("xylm,xym->xyl", gam[..., :, 1, :], gam[..., :, 0, 1])
    )
    R1212 = g[..., 0, 0] * Rl[..., 0] + g[..., 0, 1] * Rl[..., 1]
    return R1212 / det


class _DivFormOperator:
    """SPD operator u -> -d_i(w^{ij} d_j u) with spectral derivatives.

    w^{ij} = sqrt(det g) g^{ij} is the conformally invariant coefficient of
    the Laplace-Beltrami operator in divergence form.  Solves run a
    preconditioned CG specialized to 2D arrays (real or complex), with the
    exact flat inverse Laplacian as preconditioner and optional warm starts.
    """

    def __init__(self, g: np.ndarray, grid: GridSpec):
        det = _check_metric(g, grid)
        self.det = det
        self.sq = np.sqrt(det)
        self.ginv = _metric_inverse(g, det)
        w = self.sq[..., None, None] * self.ginv
        self.w00 = w[..., 0, 0]
        self.w01 = w[..., 0, 1]
        self.w11 = w[..., 1, 1]
        self.grid = grid
        n_u, n_v = grid.shape
        ku = np.fft.fftfreq(n_u, d=1.0 / n_u)
        kv = np.fft.fftfreq(n_v, d=1.0 / n_v)
        if n_u % 2 == 0:
            ku[n_u // 2] = 0.0
        if n_v % 2 == 0:
            kv[n_v // 2] = 0.0
        self.iku = (2j * np.pi * ku)[:, None]
        self.ikv = (2j * np.pi * kv)[None, :]
        k2 = -(self.iku**2 + self.ikv**2).real  # (2 pi k)^2, Nyquist zeroed
        with np.errstate(divide="ignore"):
            self.inv_k2 = np.where(k2 > 0.0, 1.0 / k2, 0.0)

    def gradient(self, u: np.ndarray):
        u_hat = np.fft.fft2(u)
        du = np.fft.ifft2(self.iku * u_hat)
        dv = np.fft.ifft2(self.ikv * u_hat)
        if np.isrealobj(u):
            return du.real, dv.real
        return du, dv

    def apply(self, u: np.ndarray) -> np.ndarray:
        du, dv = self.gradient(u)
        p = self.w00 * du + self.w01 * dv
        q = self.w01 * du + self.w11 * dv
        div = np.fft.ifft2(self.iku * np.fft.fft2(p) + self.ikv * np.fft.fft2(q))
        return -(div.real if np.isrealobj(u) else div)

    def project_range(self, r: np.ndarray) -> np.ndarray:
        """Zero the mean and the Nyquist lines (unreachable by the operator)."""
        n_u, n_v = self.grid.shape
        r_hat = np.fft.fft2(r)
        r_hat[0, 0] = 0.0
        if n_u % 2 == 0:
            r_hat[n_u // 2, :] = 0.0
        if n_v % 2 == 0:
            r_hat[:, n_v // 2] = 0.0
        out = np.fft.ifft2(r_hat)
        return out.real if np.isrealobj(r) else out

    def precondition(self, r: np.ndarray) -> np.ndarray:
        out = np.fft.ifft2(np.fft.fft2(r) * self.inv_k2)
        return out.real if np.isrealobj(r) else out

    def solve(
        self,
        rhs: np.ndarray,
        x0: np.ndarray | None = None,
        rtol: float = 1e-12,
        maxiter: int = 3000,
    ) -> np.ndarray:
        b = self.project_range(rhs)
        bnorm = float(np.linalg.norm(b))
        if bnorm == 0.0:
            return np.zeros_like(b)
        x = self.project_range(x0) if x0 is not None else np.zeros_like(b)
        r = b - self.apply(x)
        z = self.precondition(r)
        p = z.copy()
        rz = np.vdot(r, z).real
        tol = rtol * bnorm
        for _ in range(maxiter):
            if np.linalg.norm(r) <= tol:
                out = x - x.mean()
                return out.real if np.isrealobj(rhs) else out
            Ap = self.apply(p)
            alpha = rz / np.vdot(p, Ap).real
            x = x + alpha * p
            r = r - alpha * Ap
            z = self.precondition(r)
            rz_new = np.vdot(r, z).real
            p = z + (rz_new / rz) * p
            rz = rz_new
        raise UniformizationError("uniformization failed: CG did not converge")


def conformal_factor(g: np.ndarray, grid: GridSpec, gb_tol: float = 1e-2) -> ConformalFactor:
    """Solve -Delta_g u = K_g and normalize e^{-2u} g to unit volume.

    The closed genus-1 surface requires int K dmu = 0 (Gauss-Bonnet); the
    right-hand side is checked against ``gb_tol`` relative to int |K| dmu.
    """
    op = _DivFormOperator(g, grid)
    K = metric_gauss_curvature(g, grid)
    rho = K * op.sq
    total = abs(float(np.mean(rho)))
    scale = float(np.mean(np.abs(rho))) + 1e-30
    if total > max(gb_tol * scale, 1e-12):
        raise UniformizationError(
            f"not a closed genus-1 metric: |int K dmu| = {total:.3e} (scale {scale:.3e})"
        )
    u = op.solve(rho)
    vol = integrate(np.exp(-2.0 * u), op.sq, grid)
    u = u + 0.5 * np.log(vol)
    flat = np.exp(-2.0 * u)[..., None, None] * g
    return ConformalFactor(u=u, flat_metric=flat)


def _harmonic_forms(op: _DivFormOperator, x0: np.ndarray | None = None, rtol: float = 1e-12):
    """Both harmonic corrections in one complex solve: h = h_1 + i h_2."""
    grid = op.grid
    rhs1 = np.fft.ifft2(op.iku * np.fft.fft2(op.w00) + op.ikv * np.fft.fft2(op.w01)).real
    rhs2 = np.fft.ifft2(op.iku * np.fft.fft2(op.w01) + op.ikv * np.fft.fft2(op.w11)).real
    h = op.solve(rhs1 + 1j * rhs2, x0=x0, rtol=rtol)
    omega = np.zeros(grid.shape + (2, 2))
    dh_u, dh_v = op.gradient(h)
    omega[..., 0, 0] = 1.0 + dh_u.real
    omega[..., 0, 1] = dh_v.real
    omega[..., 1, 0] = dh_u.imag
    omega[..., 1, 1] = 1.0 + dh_v.imag
    return omega, h


def _hodge_star(omega: np.ndarray, ginv: np.ndarray, sq: np.ndarray, sign: float) -> np.ndarray:
    """(*omega)_i = sign sqrt(g) eps_ij g^{jk} omega_k (conformally invariant)."""
    raised = np.einsum("xyjk,xy...k->xy...j", ginv, omega)
    star = np.empty_like(omega)
    star[..., 0] = raised[..., 1]
    star[..., 1] = -raised[..., 0]
    return sign * sq[..., None] * star


def _tau_from_forms(op: _DivFormOperator, omega: np.ndarray):
    """Least-squares holomorphic combination and its modulus."""
    star1 = _hodge_star(omega[..., 0, :], op.ginv, op.sq, 1.0)
    star2 = _hodge_star(omega[..., 1, :], op.ginv, op.sq, 1.0)
    A = star2 + 1j * omega[..., 1, :]
    b = -(star1 + 1j * omega[..., 0, :])
    w = op.ginv * op.sq[..., None, None]
    num = np.einsum("xyij,xyi,xyj->", w, np.conj(A), b)
    den = np.einsum("xyij,xyi,xyj->", w, np.conj(A), A)
    if abs(den) == 0.0:
        raise UniformizationError("conformal structure ill-conditioned")
    tau = complex(num / den)
    res = A * tau - b
    rnorm = np.einsum("xyij,xyi,xyj->", w, np.conj(res), res).real
    bnorm = np.einsum("xyij,xyi,xyj->", w, np.conj(b), b).real
    residual = float(np.sqrt(max(rnorm, 0.0) / bnorm))
    star_sign = 1.0
    if tau.imag < 0.0:
        tau = np.conj(tau)
        star_sign = -1.0
    if not np.isfinite(tau.real) or tau.imag <= 1e-14:
        raise UniformizationError(f"conformal structure ill-conditioned: tau={tau}")
    return tau, star_sign, residual


def modulus(g: np.ndarray, grid: GridSpec, rtol: float = 1e-12) -> TeichmullerPoint:
    """Teichmueller projection of a metric: its modulus tau, Im tau > 0."""
    op = _DivFormOperator(g, grid)
    omega, _ = _harmonic_forms(op, rtol=rtol)
    tau, _, residual = _tau_from_forms(op, omega)
    if residual > 5e-2:
        raise UniformizationError(f"conformal structure ill-conditioned: residual={residual:.2e}")
    return TeichmullerPoint(tau)


class ModulusTracker:
    """Warm-started modulus evaluations along a path of nearby metrics.

    Correction loops evaluate the modulus many times on slowly varying
    immersions; reusing the previous harmonic solution as the CG initial
    guess cuts the iteration count by an order of magnitude.
    """

    def __init__(self, grid: GridSpec, rtol: float = 1e-11):
        self.grid = grid
        self.rtol = rtol
        self._h: np.ndarray | None = None

    def compute(self, g: np.ndarray) -> TeichmullerPoint:
        op = _DivFormOperator(g, self.grid)
        omega, h = _harmonic_forms(op, x0=self._h, rtol=self.rtol)
        self._h = h
        tau, _, residual = _tau_from_forms(op, omega)
        if residual > 5e-2:
            raise UniformizationError(
                f"conformal structure ill-conditioned: residual={residual:.2e}"
            )
        return TeichmullerPoint(tau)


def conformal_structure(
    g: np.ndarray,
    grid: GridSpec,
    rtol: float = 1e-12,
    holo_tol: float = 5e-2,
) -> ConformalStructure:
    """Full uniformization package of a metric (factor, modulus, 1-forms)."""
    op = _DivFormOperator(g, grid)
    omega, _ = _harmonic_forms(op, rtol=rtol)
    tau, star_sign, residual = _tau_from_forms(op, omega)
    if residual > holo_tol:
        raise UniformizationError(
            f"conformal structure ill-conditioned: tau={tau}, residual={residual:.3e}"
        )
    zeta = omega[..., 0, :] + tau * omega[..., 1, :]

    K = metric_gauss_curvature(g, grid)
    rho = K * op.sq
    total = abs(float(np.mean(rho)))
    scale = float(np.mean(np.abs(rho))) + 1e-30
    if total > max(1e-2 * scale, 1e-12):
        raise UniformizationError("not a closed genus-1 metric")
    u = op.solve(rho, rtol=rtol)
    vol = integrate(np.exp(-2.0 * u), op.sq, grid)
    u = u + 0.5 * np.log(vol)
    flat = np.exp(-2.0 * u)[..., None, None] * g
    return ConformalStructure(
        grid=grid, g=g, u=u, flat_metric=flat,
        omega=omega, zeta=zeta, tau=tau, star_sign=star_sign,
        holo_residual=residual,
    )


def constant_metric_modulus(G: np.ndarray) -> complex:
    """Closed-form modulus of a constant metric: (G_12 + i sqrt(det G)) / G_11."""
    G = np.asarray(G, dtype=float)
    det = G[0, 0] * G[1, 1] - G[0, 1] ** 2
    if det <= 0.0 or G[0, 0] <= 0.0:
        raise UniformizationError("constant metric not positive definite")
    return complex(G[0, 1] / G[0, 0], np.sqrt(det) / G[0, 0])


def constant_metric_from_tau(tau: complex) -> np.ndarray:
    """Unit-volume constant metric with the given modulus."""
    if tau.imag <= 0.0:
        raise UniformizationError("modulus must have Im tau > 0")
    return np.array(
        [[1.0, tau.real], [tau.real, abs(tau) ** 2]]
    ) / tau.imag


def teich_distance(t1: TeichmullerPoint | complex, t2: TeichmullerPoint | complex) -> float:
    """Hyperbolic distance on the upper half-plane (Teichmueller metric of tori)."""
    z1 = t1.tau if isinstance(t1, TeichmullerPoint) else complex(t1)
    z2 = t2.tau if isinstance(t2, TeichmullerPoint) else complex(t2)
    if z1.imag <= 0.0 or z2.imag <= 0.0:
        raise UniformizationError("moduli must lie in the upper half-plane")
    # stable form of arcosh(1 + |dz|^2 / (2 y1 y2))
    return float(2.0 * np.arcsinh(abs(z1 - z2) / (2.0 * np.sqrt(z1.imag * z2.imag))))


def chart(t: TeichmullerPoint | complex) -> np.ndarray:
    """Identity chart (Re tau, Im tau) of the upper half-plane."""
    z = t.tau if isinstance(t, TeichmullerPoint) else complex(t)
    return np.array([z.real, z.imag])


def chart_inverse(x: np.ndarray) -> TeichmullerPoint:
    return TeichmullerPoint(complex(x[0], x[1]))
