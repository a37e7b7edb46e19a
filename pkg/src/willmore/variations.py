"""Variation calculus of the Teichmueller projection under ambient motions.

For an immersion f with pullback metric g = e^{2u} gbar (gbar flat, unit
volume) and an ambient variation V, the class velocity is

    dtau_f.V = sum_r <e^{-2u} dg/dt, q^r>_{gbar} dtau_gbar.q^r
             = sum_r (-2 int g^{ik} g^{jl} <A0_ij, V> q^r_kl dmu_g) dtau_gbar.q^r,

with q^r an orthonormal basis of transverse-traceless tensors.  On the grid
torus a TT tensor is realized as q_ij = Re(h zeta_i zeta_j) with h constant
and zeta the normalized holomorphic 1-form; (a, b) with h = a - i b are the
tensor's components in the lattice-normalized conformal coordinates, where
q_11 = -q_22 = a and q_12 = q_21 = b.  Chart differentials of the modulus
are evaluated on the constant-metric avatars Q = P^T q^z P via the closed
form tau(G) = (G_12 + i sqrt(det G)) / G_11.

The second variation follows the sigma gbar + L_X gbar + q decomposition of
the metric velocity; rank_report detects the isothermic (rank-deficient)
case through the Gram matrix of the constraint-gradient fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, lsmr

from .geometry import GeometryCache, Immersion, curvature
from .grid import GridSpec, integrate, partial, spectral_partial, vector_poisson_solve
from .uniformization import (
    ConformalStructure,
    UniformizationError,
    conformal_structure,
    constant_metric_modulus,
)

__all__ = [
    "TTTensor",
    "TensorDecomposition",
    "VariationReport",
    "VariationContext",
    "variation_context",
    "tt_basis",
    "tt_field",
    "tt_avatar",
    "metric_variation",
    "first_variation",
    "decompose",
    "reconstruct",
    "second_variation",
    "rank_report",
]

RANK_EIGENVALUE_RATIO = 1e-6


@dataclass(frozen=True)
class TTTensor:
    """Constant transverse-traceless tensor in conformal components.

    a = q_11 = -q_22 and b = q_12 = q_21 in the lattice-normalized conformal
    coordinates; the complex form is h = a - i b.
    """

    a: float
    b: float

    @property
    def h(self) -> complex:
        return complex(self.a, -self.b)

    @property
    def norm(self) -> float:
        return float(np.hypot(self.a, self.b))

    @staticmethod
    def from_h(h: complex) -> "TTTensor":
        return TTTensor(h.real, -h.imag)


def tt_field(q: TTTensor, structure: ConformalStructure) -> np.ndarray:
    """Grid-coordinate realization q_ij = Re(h zeta_i zeta_j)."""
    zz = structure.zeta[..., :, None] * structure.zeta[..., None, :]
    return np.real(q.h * zz)


def tt_avatar(q: TTTensor, tau: complex) -> np.ndarray:
    """Constant-matrix avatar P^T q^z P on the unit-square lattice."""
    P = np.array([[1.0, tau.real], [0.0, tau.imag]])
    qz = np.array([[q.a, q.b], [q.b, -q.a]])
    return P.T @ qz @ P


def _dtau_const(G: np.ndarray, Q: np.ndarray) -> complex:
    """Exact derivative of tau(G) = (G_12 + i sqrt(det G))/G_11 along Q."""
    det = G[0, 0] * G[1, 1] - G[0, 1] ** 2
    ddet = G[1, 1] * Q[0, 0] + G[0, 0] * Q[1, 1] - 2.0 * G[0, 1] * Q[0, 1]
    sq = np.sqrt(det)
    tau = (G[0, 1] + 1j * sq) / G[0, 0]
    return (Q[0, 1] + 0.5j * ddet / sq) / G[0, 0] - tau * Q[0, 0] / G[0, 0]


def _d2tau_const(G: np.ndarray, Q: np.ndarray, R: np.ndarray, eps: float = 1e-5) -> complex:
    """Second chart differential by central differences of the exact dtau."""
    scale = max(np.abs(G).max(), 1.0)
    e = eps * scale / max(np.abs(R).max(), 1e-30)
    return (_dtau_const(G + e * R, Q) - _dtau_const(G - e * R, Q)) / (2.0 * e)


def _tensor_l2(
    S: np.ndarray, T: np.ndarray, metric: np.ndarray, metric_inv: np.ndarray,
    sqrt_det: np.ndarray, grid: GridSpec,
) -> float:
    """int g^{ik} g^{jl} S_ij T_kl dmu_g."""
    up = np.einsum("xyik,xyjl,xykl->xyij", metric_inv, metric_inv, T)
    return integrate(np.einsum("xyij,xyij->xy", S, up), sqrt_det, grid)


def tt_basis(flat_metric: np.ndarray, structure: ConformalStructure | None = None):
    """Orthonormal TT basis w.r.t. a constant unit-volume flat metric.

    Input may be a constant (2, 2) matrix or a constant tensor field;
    non-constant input is rejected.  When a structure is supplied the basis
    is re-orthonormalized against the realized fields' Gram matrix (a
    machine-precision correction for constant metrics).
    """
    G = np.asarray(flat_metric, dtype=float)
    if G.ndim == 4:
        if np.max(np.abs(G - G[0, 0])) > 1e-10 * max(1.0, np.abs(G).max()):
            raise UniformizationError("tt_basis requires a constant flat metric")
        G = G[0, 0]
    if G.shape != (2, 2):
        raise UniformizationError("flat metric must be 2x2")
    tau = constant_metric_modulus(G)
    s = 1.0 / (np.sqrt(2.0) * tau.imag)
    basis = [TTTensor(s, 0.0), TTTensor(0.0, s)]
    if structure is not None:
        basis = _orthonormalize(basis, structure)
    return basis


def _orthonormalize(basis, structure: ConformalStructure):
    gbar = structure.flat_metric
    det = gbar[..., 0, 0] * gbar[..., 1, 1] - gbar[..., 0, 1] ** 2
    sq = np.sqrt(det)
    ginv = np.empty_like(gbar)
    ginv[..., 0, 0] = gbar[..., 1, 1]
    ginv[..., 0, 1] = -gbar[..., 0, 1]
    ginv[..., 1, 0] = -gbar[..., 0, 1]
    ginv[..., 1, 1] = gbar[..., 0, 0]
    ginv = ginv / det[..., None, None]
    fields = [tt_field(q, structure) for q in basis]
    M = np.array(
        [
            [_tensor_l2(fields[r], fields[s], gbar, ginv, sq, structure.grid) for s in range(2)]
            for r in range(2)
        ]
    )
    L = np.linalg.cholesky(M)
    Linv = np.linalg.inv(L)
    hs = [q.h for q in basis]
    return [
        TTTensor.from_h(Linv[r, 0] * hs[0] + Linv[r, 1] * hs[1]) for r in range(2)
    ]


@dataclass
class VariationContext:
    """Everything needed to differentiate the class projection at one f."""

    f: Immersion
    cache: GeometryCache              # spectral-lane curvature package
    structure: ConformalStructure
    basis: list                       # orthonormal TTTensors
    q_fields: np.ndarray              # (2, nu, nv, 2, 2)
    dchart: np.ndarray                # (2, 2): row r = chart vector of dtau.q^r
    d2chart: np.ndarray               # (2, 2, 2): [r, s] = chart vector

    @property
    def grid(self) -> GridSpec:
        return self.f.grid

    @property
    def tau(self) -> complex:
        return self.structure.tau

    def constraint_gradients(self) -> np.ndarray:
        """Phi_r = g^{ik} g^{jl} q^r_kl A0_ij, shape (2, nu, nv, n)."""
        c = self.cache
        out = []
        for r in range(2):
            up = np.einsum(
                "xyik,xyjl,xykl->xyij", c.g_inv, c.g_inv, self.q_fields[r]
            )
            out.append(np.einsum("xyija,xyij->xya", c.A0, up))
        return np.stack(out)


def variation_context(f: Immersion) -> VariationContext:
    cache = curvature(f, lane="spectral")
    structure = conformal_structure(cache.g, f.grid)
    basis = tt_basis(structure.constant_metric, structure)
    q_fields = np.stack([tt_field(q, structure) for q in basis])
    G = structure.constant_metric
    avatars = [tt_avatar(q, structure.tau) for q in basis]
    dchart = np.array(
        [[_dtau_const(G, A).real, _dtau_const(G, A).imag] for A in avatars]
    )
    d2chart = np.empty((2, 2, 2))
    for r in range(2):
        for s in range(2):
            val = _d2tau_const(G, avatars[r], avatars[s])
            d2chart[r, s] = (val.real, val.imag)
    return VariationContext(
        f=f, cache=cache, structure=structure, basis=basis,
        q_fields=q_fields, dchart=dchart, d2chart=d2chart,
    )


def metric_variation(f: Immersion, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First and second t-derivatives of (f + tV)^* g_euc at t = 0.

    d_t g_ij = <d_i f, d_j V> + <d_j f, d_i V>, d_tt g_ij = 2 <d_i V, d_j V>;
    grid finite differences, consistent with pullback_metric.
    """
    grid = f.grid
    if V.shape != f.points.shape:
        raise ValueError("variation field shape mismatch")
    fu = partial(f.points, "u", grid)
    fv = partial(f.points, "v", grid)
    Vu = partial(V, "u", grid)
    Vv = partial(V, "v", grid)
    df = np.stack([fu, fv], axis=2)
    dV = np.stack([Vu, Vv], axis=2)
    first = np.einsum("xyia,xyja->xyij", df, dV)
    first = first + np.swapaxes(first, 2, 3)
    second = 2.0 * np.einsum("xyia,xyja->xyij", dV, dV)
    return first, second


def _spectral_metric_velocity(ctx: VariationContext, V: np.ndarray) -> np.ndarray:
    grid = ctx.grid
    dV = np.stack(
        [spectral_partial(V, "u", grid), spectral_partial(V, "v", grid)], axis=2
    )
    first = np.einsum("xyia,xyja->xyij", ctx.cache.df, dV)
    return first + np.swapaxes(first, 2, 3)


def first_variation(
    ctx: VariationContext | Immersion, V: np.ndarray, return_forms: bool = False
):
    """Class velocity dtau_f.V in chart coordinates (2-vector).

    Computes both integral forms: the curvature pairing
    -2 int g^{ik} g^{jl} <A0_ij, V> q^r dmu (primary) and the metric pairing
    int g^{ik} g^{jl} (d_t g)_ij q^r dmu; they agree by integration by parts
    against the divergence-free trace-free q^r.
    """
    if isinstance(ctx, Immersion):
        ctx = variation_context(ctx)
    c = ctx.cache
    coeff_a = np.empty(2)
    coeff_m = np.empty(2)
    pair = np.einsum("xyija,xya->xyij", c.A0, V)
    dg = _spectral_metric_velocity(ctx, V)
    for r in range(2):
        coeff_a[r] = -2.0 * _tensor_l2(
            pair, ctx.q_fields[r], c.g, c.g_inv, c.sqrt_det_g, ctx.grid
        )
        coeff_m[r] = _tensor_l2(
            dg, ctx.q_fields[r], c.g, c.g_inv, c.sqrt_det_g, ctx.grid
        )
    out = coeff_a @ ctx.dchart
    if return_forms:
        return out, coeff_a, coeff_m, coeff_m @ ctx.dchart
    return out


@dataclass
class TensorDecomposition:
    """Split S = sigma gbar + L_X gbar + q over a flat background."""

    sigma: np.ndarray
    X: np.ndarray               # vector field components X^k, zero mean
    q: TTTensor
    q_matrix: np.ndarray        # constant grid-coordinate matrix of q
    residual: float             # relative reconstruction residual


def _constant_background(background) -> np.ndarray | None:
    G = np.asarray(background, dtype=float) if not isinstance(background, ConformalStructure) else None
    if G is None:
        return None
    if G.ndim == 4:
        if np.max(np.abs(G - G[0, 0])) > 1e-10 * max(1.0, np.abs(G).max()):
            raise UniformizationError("decompose requires a constant flat metric")
        G = G[0, 0]
    if G.shape != (2, 2):
        raise UniformizationError("flat metric must be 2x2")
    return G


def decompose(S: np.ndarray, background, grid: GridSpec) -> TensorDecomposition:
    """Decompose a symmetric tensor field over a flat background.

    For a constant background the split is computed exactly per Fourier
    mode: q is the mean of the trace-free part, X comes from
    vector_poisson_solve, sigma from the trace.  A ConformalStructure
    background (non-constant flat metric) uses the least-squares path.
    """
    G = _constant_background(background)
    if G is None:
        return _decompose_general(S, background, grid)
    Ginv = np.linalg.inv(G)
    tr = np.einsum("ij,xyij->xy", Ginv, S)
    S0 = S - 0.5 * tr[..., None, None] * G
    q_mat = S0.mean(axis=(0, 1))
    # covector solve, then raise with the constant metric
    X_cov = vector_poisson_solve(S0 - q_mat, grid, background=G)
    X = np.einsum("ij,xyj->xyi", Ginv, X_cov)
    div = 0.5 * np.einsum("ij,xyij->xy", Ginv, _sym_grad(X_cov, grid))
    sigma = 0.5 * tr - div
    tau = constant_metric_modulus(G)
    P = np.array([[1.0, tau.real], [0.0, tau.imag]])
    qz = np.linalg.inv(P).T @ q_mat @ np.linalg.inv(P)
    q = TTTensor(qz[0, 0], qz[0, 1])
    recon = reconstruct(sigma, X, q_mat, G, grid)
    scale = max(float(np.max(np.abs(S))), 1e-30)
    residual = float(np.max(np.abs(recon - S))) / scale
    return TensorDecomposition(sigma=sigma, X=X, q=q, q_matrix=q_mat, residual=residual)


def _sym_grad(X_cov: np.ndarray, grid: GridSpec) -> np.ndarray:
    """d_i X_j + d_j X_i for covector components (spectral)."""
    dX = np.stack(
        [spectral_partial(X_cov, "u", grid), spectral_partial(X_cov, "v", grid)],
        axis=2,
    )  # (nu, nv, i(deriv), j)
    return dX + np.swapaxes(dX, 2, 3)


def reconstruct(
    sigma: np.ndarray, X: np.ndarray, q_mat: np.ndarray, G: np.ndarray, grid: GridSpec
) -> np.ndarray:
    """sigma G + L_X G + q for a constant background G and vector field X."""
    X_cov = np.einsum("ij,xyj->xyi", G, X)
    return sigma[..., None, None] * G + _sym_grad(X_cov, grid) + q_mat


def _lie_metric(X: np.ndarray, T: np.ndarray, grid: GridSpec) -> np.ndarray:
    """(L_X T)_ij = X^k d_k T_ij + T_kj d_i X^k + T_ik d_j X^k (spectral)."""
    dT = np.stack(
        [spectral_partial(T, "u", grid), spectral_partial(T, "v", grid)], axis=2
    )  # (nu, nv, k, i, j)
    dX = np.stack(
        [spectral_partial(X, "u", grid), spectral_partial(X, "v", grid)], axis=2
    )  # (nu, nv, i(deriv), k)
    adv = np.einsum("xyk,xykij->xyij", X, dT)
    grad = np.einsum("xykj,xyik->xyij", T, dX)
    return adv + grad + np.swapaxes(grad, 2, 3)


def _decompose_general(
    S: np.ndarray, structure: ConformalStructure, grid: GridSpec,
    basis=None, q_fields=None, lsmr_tol: float = 1e-11, lsmr_maxiter: int = 3000,
) -> TensorDecomposition:
    """Least-squares sigma/X/q split over a non-constant flat background.

    Solves min ||sigma gbar + L_X gbar - (S - q)||_{L2(gbar)} with q the
    L2(gbar) projection of S onto the realized TT fields, using LSMR with
    exact discrete adjoints (spectral derivatives are skew-adjoint).
    """
    gbar = structure.flat_metric
    det = gbar[..., 0, 0] * gbar[..., 1, 1] - gbar[..., 0, 1] ** 2
    sq = np.sqrt(det)
    ginv = np.empty_like(gbar)
    ginv[..., 0, 0] = gbar[..., 1, 1]
    ginv[..., 0, 1] = -gbar[..., 0, 1]
    ginv[..., 1, 0] = -gbar[..., 0, 1]
    ginv[..., 1, 1] = gbar[..., 0, 0]
    ginv = ginv / det[..., None, None]

    if basis is None:
        basis = tt_basis(structure.constant_metric, structure)
    if q_fields is None:
        q_fields = np.stack([tt_field(q, structure) for q in basis])
    beta = np.array(
        [_tensor_l2(S, q_fields[r], gbar, ginv, sq, grid) for r in range(2)]
    )
    q_h = beta[0] * basis[0].h + beta[1] * basis[1].h
    q = TTTensor.from_h(q_h)
    q_field = np.real(
        q.h * structure.zeta[..., :, None] * structure.zeta[..., None, :]
    )
    T = S - q_field

    # pointwise weight: sqrt(mu) B^{1/2} Y B^{1/2} linearizes the L2(gbar) norm
    w = sq * grid.h_u * grid.h_v
    tr_ginv = ginv[..., 0, 0] + ginv[..., 1, 1]
    det_ginv = 1.0 / det
    denom = np.sqrt(tr_ginv + 2.0 * np.sqrt(det_ginv))
    Bh = (ginv + np.sqrt(det_ginv)[..., None, None] * np.eye(2)) / denom[..., None, None]
    Wgt = np.sqrt(w)

    dgbar = np.stack(
        [spectral_partial(gbar, "u", grid), spectral_partial(gbar, "v", grid)], axis=2
    )
    shape = grid.shape
    N = shape[0] * shape[1]

    # Fourier diagonal scaling of the X block: L_X gbar responds like 2 pi |k|,
    # the sigma block like O(1); whitening keeps LSMR iteration counts flat.
    ku = np.fft.fftfreq(shape[0], d=1.0 / shape[0])
    kv = np.fft.fftfreq(shape[1], d=1.0 / shape[1])
    kabs = np.sqrt(ku[:, None] ** 2 + kv[None, :] ** 2)
    mult = 1.0 / (1.0 + 2.0 * np.pi * kabs)

    def scale_X(X):
        return np.real(np.fft.ifft2(mult[..., None] * np.fft.fft2(X, axes=(0, 1)), axes=(0, 1)))

    def weight(Y):
        return Wgt[..., None, None] * np.einsum("xyik,xykl,xylj->xyij", Bh, Y, Bh)

    def op(p):
        sigma = p[:N].reshape(shape)
        X = scale_X(p[N:].reshape(shape + (2,)))
        Y = sigma[..., None, None] * gbar + _lie_metric(X, gbar, grid)
        return weight(Y).ravel()

    def op_T(z):
        Z = z.reshape(shape + (2, 2))
        Z = 0.5 * (Z + np.swapaxes(Z, 2, 3))  # forward range is symmetric
        Ystar = weight(Z)  # weight is pointwise self-adjoint and preserves symmetry
        sigma_adj = np.einsum("xyij,xyij->xy", Ystar, gbar)
        X_adj = np.einsum("xyij,xykij->xyk", Ystar, dgbar)
        inner = np.einsum("xyij,xykj->xyik", Ystar, gbar)  # c_{ik} = Y*_ij gbar_kj
        X_adj -= 2.0 * (
            spectral_partial(inner[..., 0, :], "u", grid)
            + spectral_partial(inner[..., 1, :], "v", grid)
        )
        return np.concatenate([sigma_adj.ravel(), scale_X(X_adj).ravel()])

    A = LinearOperator((4 * N, 3 * N), matvec=op, rmatvec=op_T)
    b = weight(T).ravel()
    sol = lsmr(A, b, atol=lsmr_tol, btol=lsmr_tol, maxiter=lsmr_maxiter)
    p = sol[0]
    sigma = p[:N].reshape(shape)
    X = scale_X(p[N:].reshape(shape + (2,)))
    X = X - X.mean(axis=(0, 1))
    recon = sigma[..., None, None] * gbar + _lie_metric(X, gbar, grid) + q_field
    scale = max(float(np.sqrt(_tensor_l2(S, S, gbar, ginv, sq, grid))), 1e-30)
    res = recon - S
    residual = float(np.sqrt(max(_tensor_l2(res, res, gbar, ginv, sq, grid), 0.0))) / scale
    return TensorDecomposition(
        sigma=sigma, X=X, q=q, q_matrix=tt_avatar(q, structure.tau), residual=residual
    )


def second_variation(
    ctx: VariationContext | Immersion, V: np.ndarray,
    lsmr_tol: float = 1e-11, lsmr_maxiter: int = 3000,
) -> np.ndarray:
    """Second variation of the chart projection along f + tV (2-vector).

    Assembled from the decomposition of the metric velocity:
    alpha_r pairs the acceleration and Lie-transport terms with q^r,
    beta_r = <q, q^r>, and the chart Hessian acts on the TT part.
    """
    if isinstance(ctx, Immersion):
        ctx = variation_context(ctx)
    grid = ctx.grid
    st = ctx.structure
    gbar = st.flat_metric
    det = gbar[..., 0, 0] * gbar[..., 1, 1] - gbar[..., 0, 1] ** 2
    sq = np.sqrt(det)
    ginv = np.empty_like(gbar)
    ginv[..., 0, 0] = gbar[..., 1, 1]
    ginv[..., 0, 1] = -gbar[..., 0, 1]
    ginv[..., 1, 0] = -gbar[..., 0, 1]
    ginv[..., 1, 1] = gbar[..., 0, 0]
    ginv = ginv / det[..., None, None]

    e2u = np.exp(-2.0 * st.u)[..., None, None]
    dg = _spectral_metric_velocity(ctx, V)
    dV = np.stack(
        [spectral_partial(V, "u", grid), spectral_partial(V, "v", grid)], axis=2
    )
    ddg = 2.0 * np.einsum("xyia,xyja->xyij", dV, dV)

    T = e2u * dg
    dec = _decompose_general(T, st, grid, basis=ctx.basis, q_fields=ctx.q_fields,
                             lsmr_tol=lsmr_tol, lsmr_maxiter=lsmr_maxiter)
    beta = np.array(
        [_tensor_l2(T, ctx.q_fields[r], gbar, ginv, sq, grid) for r in range(2)]
    )
    q_field = np.real(
        dec.q.h * st.zeta[..., :, None] * st.zeta[..., None, :]
    )
    LXg = _lie_metric(dec.X, gbar, grid)
    core = (
        e2u * ddg
        - _lie_metric(dec.X, LXg, grid)
        - 2.0 * dec.sigma[..., None, None] * LXg
        - 2.0 * dec.sigma[..., None, None] * q_field
        - 2.0 * _lie_metric(dec.X, q_field, grid)
    )
    alpha = np.array(
        [_tensor_l2(core, ctx.q_fields[r], gbar, ginv, sq, grid) for r in range(2)]
    )
    out = alpha @ ctx.dchart
    for r in range(2):
        for s in range(2):
            out = out + beta[r] * beta[s] * ctx.d2chart[r, s]
    return out


@dataclass
class VariationReport:
    """Rank structure of the class-projection differential at an immersion."""

    gram: np.ndarray
    eigenvalues: np.ndarray
    rank: int
    annihilator: TTTensor | None
    null_direction: np.ndarray | None
    image_direction: np.ndarray | None

    @property
    def eigenvalue_ratio(self) -> float:
        lmax = float(self.eigenvalues.max())
        return float(self.eigenvalues.min()) / lmax if lmax > 0 else 0.0


def rank_report(
    ctx: VariationContext | Immersion, eps_rank: float = RANK_EIGENVALUE_RATIO
) -> VariationReport:
    """Gram matrix of the constraint gradients Phi_r and its numerical rank.

    rank 1 <=> isothermic surface: the null eigenvector gives the
    annihilating TT tensor and the chart direction e orthogonal to the
    attainable variations (signed so that <dtau.q_ann, e> > 0).
    """
    if isinstance(ctx, Immersion):
        ctx = variation_context(ctx)
    c = ctx.cache
    phi = ctx.constraint_gradients()
    gram = np.empty((2, 2))
    for r in range(2):
        for s in range(r, 2):
            val = integrate(
                np.einsum("xya,xya->xy", phi[r], phi[s]), c.sqrt_det_g, ctx.grid
            )
            gram[r, s] = val
            gram[s, r] = val
    evals, evecs = np.linalg.eigh(gram)
    lmax = float(evals[-1])
    a0_scale = integrate(c.norm_sq(c.A0), c.sqrt_det_g, ctx.grid)
    if lmax <= 1e-14 * max(a0_scale, 1.0) ** 2 or a0_scale <= 1e-12:
        raise UniformizationError("invalid: vanishing tracefree form")
    rank = int(np.sum(evals > eps_rank * lmax))
    annihilator = None
    null_dir = None
    image_dir = None
    if rank == 1:
        w_null = evecs[:, 0]
        w_img = evecs[:, 1]
        h_ann = w_null[0] * ctx.basis[0].h + w_null[1] * ctx.basis[1].h
        annihilator = TTTensor.from_h(h_ann)
        m = w_img @ ctx.dchart
        e = np.array([-m[1], m[0]])
        e = e / np.linalg.norm(e)
        d_ann = w_null @ ctx.dchart
        if float(d_ann @ e) < 0:
            e = -e
        null_dir = e
        image_dir = m / np.linalg.norm(m)
    return VariationReport(
        gram=gram, eigenvalues=evals, rank=rank,
        annihilator=annihilator, null_direction=null_dir, image_direction=image_dir,
    )
