"""Restoring a prescribed conformal class after an ambient perturbation.

Full-rank case: Newton iteration on the correction coefficients lambda of
f + lambda_r V_r, with basis fields V_r built from the constraint gradients
Phi_r = g^{ik} g^{jl} q^r_kl A0_ij (masked and re-mixed so the Jacobian of
the chart map is the identity at the base point).

Degenerate (isothermic) case: the class can only be moved quadratically
along the null direction e.  Bump fields V_+/V_- with product profiles in
45-degree-rotated local conformal coordinates produce second variations of
opposite sign along e; the correction then solves

    Phi(lambda, mu, nu) = eta,    mu nu = 0,

with the inverse-function-theorem solver below: a Banach fixed point in the
lambda block nested inside a bisection on the scalar branch variable, with
the branch chosen so the reduced scalar function starts nonpositive and is
uniformly convex.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import GeometryCache, Immersion, l2_norm
from .grid import GridSpec
from .uniformization import (
    ModulusTracker,
    TeichmullerPoint,
    chart,
    modulus,
    teich_distance,
)
from .variations import (
    VariationContext,
    VariationReport,
    first_variation,
    rank_report,
    second_variation,
    variation_context,
)
from .geometry import pullback_metric

__all__ = [
    "CorrectionError",
    "IFTProblem",
    "IFTResult",
    "CorrectionBasis",
    "ift_solve",
    "check_ift_hypotheses",
    "build_basis_fields",
    "correct_full_rank",
    "correct_degenerate",
]


class CorrectionError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# inverse-function-theorem solver with one quadratic direction
# ---------------------------------------------------------------------------


@dataclass
class IFTProblem:
    """Black-box map Phi = (Phi_0, phi): B_{lambda0} in R^{M+2} -> R^{M+1}.

    Hypotheses (checkable by sampling): ||d_lambda Phi_0 - I|| <= 1/2,
    |d_(mu,nu) Phi_0|, |d_lambda phi| <= epsilon, ||D^2 Phi|| <= lambda_cap,
    d_mumu phi >= gamma, -d_nunu phi >= gamma.
    """

    phi: Callable[[np.ndarray], np.ndarray]
    M: int
    epsilon: float
    gamma: float
    lambda_cap: float
    lambda0: float
    eta: np.ndarray

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=float)
        if self.eta.shape != (self.M + 1,):
            raise CorrectionError(f"eta must have length M+1 = {self.M + 1}")
        if not (self.gamma > 0 and self.lambda0 > 0 and self.lambda_cap >= 1):
            raise CorrectionError("need gamma > 0, lambda0 > 0, lambda_cap >= 1")

    def split(self, value: np.ndarray) -> tuple[np.ndarray, float]:
        value = np.asarray(value, dtype=float)
        return value[: self.M], float(value[self.M])

    def pack(self, lam: np.ndarray, mu: float, nu: float) -> np.ndarray:
        return np.concatenate([np.atleast_1d(lam), [mu, nu]])


@dataclass
class IFTResult:
    xi: np.ndarray                  # (lambda, mu, nu)
    residual: float
    branch: str                     # 'mu' or 'nu'
    reflected: bool                 # search ran along the negative ray
    iterations: int                 # scalar root-finding iterations
    phi_calls: int
    contraction_ratio: float        # certified Lipschitz ratio of T_mu
    bound_constant: float           # measured C in |xi| <= C gamma^{-1/2} |Phi(0)-eta|^{1/2}
    second: np.ndarray | None = None  # opposite-side solution, if requested/found

    @property
    def lam(self) -> np.ndarray:
        return self.xi[:-2]

    @property
    def mu(self) -> float:
        return float(self.xi[-2])

    @property
    def nu(self) -> float:
        return float(self.xi[-1])


class _CallCounter:
    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        return np.asarray(self.fn(x), dtype=float)


def check_ift_hypotheses(p: IFTProblem, n_radial: int = 2, delta_rel: float = 1e-4) -> dict:
    """Sample the hypothesis set of the solver on a stencil inside the ball.

    Finite differences with step delta_rel * lambda0; returns the measured
    worst-case constants and a boolean 'ok' against (epsilon, gamma,
    lambda_cap).
    """
    M = p.M
    dim = M + 2
    delta = delta_rel * p.lambda0
    pts = [np.zeros(dim)]
    for r in range(1, n_radial + 1):
        rad = 0.4 * p.lambda0 * r / n_radial
        for k in range(dim):
            for s in (-1.0, 1.0):
                x = np.zeros(dim)
                x[k] = s * rad
                pts.append(x)

    f = _CallCounter(p.phi)
    worst = {
        "dlam_Phi0_minus_I": 0.0,
        "dmunu_Phi0": 0.0,
        "dlam_phi": 0.0,
        "d2": 0.0,
        "dmumu_phi": np.inf,
        "dnunu_phi_neg": np.inf,
    }
    for x in pts:
        J = np.empty((M + 1, dim))
        for k in range(dim):
            e = np.zeros(dim)
            e[k] = delta
            J[:, k] = (f(x + e) - f(x - e)) / (2 * delta)
        dlam0 = J[:M, :M]
        worst["dlam_Phi0_minus_I"] = max(
            worst["dlam_Phi0_minus_I"],
            float(np.linalg.norm(dlam0 - np.eye(M), 2)) if M else 0.0,
        )
        worst["dmunu_Phi0"] = max(
            worst["dmunu_Phi0"],
            float(np.linalg.norm(J[:M, M:], 2)) if M else 0.0,
        )
        worst["dlam_phi"] = max(worst["dlam_phi"], float(np.linalg.norm(J[M, :M])))
        f0 = f(x)
        for k in range(dim):
            e = np.zeros(dim)
            e[k] = delta
            second = (f(x + e) - 2 * f0 + f(x - e)) / delta**2
            worst["d2"] = max(worst["d2"], float(np.max(np.abs(second))))
            if k == M:
                worst["dmumu_phi"] = min(worst["dmumu_phi"], float(second[M]))
            if k == M + 1:
                worst["dnunu_phi_neg"] = min(worst["dnunu_phi_neg"], float(-second[M]))
        for k in range(dim):
            for l in range(k + 1, dim):
                ek = np.zeros(dim); ek[k] = delta
                el = np.zeros(dim); el[l] = delta
                mixed = (f(x + ek + el) - f(x + ek - el) - f(x - ek + el) + f(x - ek - el)) / (4 * delta**2)
                worst["d2"] = max(worst["d2"], float(np.max(np.abs(mixed))))

    ok = (
        worst["dlam_Phi0_minus_I"] <= 0.5 + 1e-9
        and worst["dmunu_Phi0"] <= p.epsilon * (1 + 1e-9) + 1e-12
        and worst["dlam_phi"] <= p.epsilon * (1 + 1e-9) + 1e-12
        and worst["d2"] <= p.lambda_cap * (1 + 1e-9) + 1e-12
        and worst["dmumu_phi"] >= p.gamma * (1 - 1e-9) - 1e-12
        and worst["dnunu_phi_neg"] >= p.gamma * (1 - 1e-9) - 1e-12
    )
    worst["ok"] = bool(ok)
    worst["phi_calls"] = f.calls
    return worst


def ift_solve(
    p: IFTProblem,
    want_second: bool = False,
    check_hypotheses: bool = False,
    fixpoint_tol: float = 1e-14,
    scalar_ftol: float = 1e-12,
    max_bisect: int = 200,
) -> IFTResult:
    """Solve Phi(xi) = eta with mu nu = 0 inside the lambda0 ball.

    Algorithm from the underlying proof: for frozen branch variable m the
    lambda block is solved by the contraction T_m(lam) = lam - Phi_0 + eta_0
    (Banach fixed point; observed Lipschitz ratio must stay <= 1/2), then
    the reduced scalar psi(m) = phi(lam(m), m) - eta_bar is driven to zero
    by bisection on [0, lambda0/2) after orienting the problem so that
    psi(0) <= 0; the scalar is negated and the branch switched from mu to nu
    when psi(0) > 0, and reflected so the search starts uphill.
    """
    if check_hypotheses:
        hyp = check_ift_hypotheses(p)
        if not hyp["ok"]:
            raise CorrectionError(f"IFT hypotheses fail: {hyp}")

    f = _CallCounter(p.phi)
    eta0, eta_bar = p.eta[: p.M], float(p.eta[p.M])

    val0 = f(p.pack(np.zeros(p.M), 0.0, 0.0))
    phi00, scal0 = p.split(val0)
    if np.linalg.norm(phi00 - eta0) > min(p.lambda_cap * p.lambda0**2, p.lambda0 / 8.0) * (1 + 1e-9):
        raise CorrectionError(
            "IFT smallness condition on |Phi_0(0) - eta_0| violated"
        )
    if abs(scal0 - eta_bar) > p.gamma * p.lambda0**2 / 32.0 * (1 + 1e-9):
        raise CorrectionError("IFT smallness condition on |phi(0) - eta_bar| violated")

    state = {"ratio": 0.0}

    def solve_lambda(mu: float, nu: float, lam_start: np.ndarray):
        lam = lam_start.copy()
        prev_step = None
        for _ in range(200):
            val = f(p.pack(lam, mu, nu))
            phi0, scal = p.split(val)
            step = -(phi0 - eta0)
            lam = lam + step
            ns = float(np.linalg.norm(step))
            if prev_step is not None and prev_step > 0:
                state["ratio"] = max(state["ratio"], ns / prev_step)
                if state["ratio"] > 0.75:
                    raise CorrectionError(
                        f"fixed point failed: contraction ratio {state['ratio']:.3f}"
                    )
            prev_step = ns
            if ns <= fixpoint_tol * max(1.0, p.lambda0):
                return lam, scal
        raise CorrectionError("fixed point failed: no convergence")

    lam_cache = np.zeros(p.M)

    def make_psi(branch: str, sgn_scalar: float, sgn_m: float):
        def psi(m: float) -> float:
            nonlocal lam_cache
            mm = sgn_m * m
            mu, nu = (mm, 0.0) if branch == "mu" else (0.0, mm)
            lam, scal = solve_lambda(mu, nu, lam_start=lam_cache)
            lam_cache = lam
            return sgn_scalar * (scal - eta_bar)

        return psi

    # branch selection: psi(0) <= 0 needed; switching mu -> nu negates phi
    lam0_sol, scal_at0 = solve_lambda(0.0, 0.0, np.zeros(p.M))
    lam_cache = lam0_sol
    psi0_raw = scal_at0 - eta_bar
    if psi0_raw <= 0.0:
        branch, sgn_scalar = "mu", 1.0
    else:
        branch, sgn_scalar = "nu", -1.0

    # reflection: start uphill (the convex scalar must cross zero on the ray)
    probe = 1e-3 * p.lambda0
    reflected = False
    psi_p = make_psi(branch, sgn_scalar, +1.0)
    psi_m = make_psi(branch, sgn_scalar, -1.0)
    slope = (psi_p(probe) - psi_m(probe)) / (2.0 * probe)
    if slope < 0.0:
        reflected = True
    psi = psi_m if reflected else psi_p
    sgn_m = -1.0 if reflected else 1.0

    psi0 = sgn_scalar * psi0_raw
    m_hi = 0.5 * p.lambda0 * (1.0 - 1e-12)

    def bisect_root(fun, f_lo) -> tuple[float, float, int]:
        """Geometric bracket expansion from the gamma-predicted root scale,
        then plain bisection (robust for the nearly flat degenerate scalar)."""
        if f_lo > 0.0:
            raise CorrectionError("root bracketing failed: psi(0) > 0")
        it = 0
        a, b = 0.0, 2.0 * np.sqrt(max(-f_lo, 0.0) / p.gamma) + 1e-3 * p.lambda0
        b = min(b, m_hi)
        f_b = fun(b)
        it += 1
        while f_b < 0.0 and b < m_hi * (1.0 - 1e-14):
            a = b
            b = min(2.0 * b, m_hi)
            f_b = fun(b)
            it += 1
        if f_b < 0.0:
            raise CorrectionError("root bracketing failed: no sign change on bracket")
        while it < max_bisect:
            mid = 0.5 * (a + b)
            fm = fun(mid)
            it += 1
            if abs(fm) <= scalar_ftol or (b - a) < 1e-16 * p.lambda0:
                return mid, fm, it
            if fm <= 0.0:
                a = mid
            else:
                b = mid
        return 0.5 * (a + b), fun(0.5 * (a + b)), it

    if abs(psi0) <= scalar_ftol:
        m_root, f_root, iters = 0.0, psi0, 0
    else:
        m_root, f_root, iters = bisect_root(psi, psi0)

    mm = sgn_m * m_root
    mu, nu = (mm, 0.0) if branch == "mu" else (0.0, mm)
    lam, _ = solve_lambda(mu, nu, lam_start=lam_cache)
    xi = p.pack(lam, mu, nu)
    residual = float(np.linalg.norm(f(xi) - p.eta))
    drift = float(np.linalg.norm(val0 - p.eta))
    bound_c = (
        float(np.linalg.norm(xi)) * np.sqrt(p.gamma) / np.sqrt(drift) if drift > 0 else 0.0
    )

    second = None
    if want_second:
        # opposite-side root (exists under the |D phi(0)| <= sigma clause)
        psi_opp = make_psi(branch, sgn_scalar, -sgn_m)
        try:
            lam_cache = lam0_sol
            m2, _, _ = bisect_root(psi_opp, psi0)
            mm2 = -sgn_m * m2
            mu2, nu2 = (mm2, 0.0) if branch == "mu" else (0.0, mm2)
            lam2, _ = solve_lambda(mu2, nu2, lam_start=lam_cache)
            second = p.pack(lam2, mu2, nu2)
        except CorrectionError:
            second = None

    return IFTResult(
        xi=xi, residual=residual, branch=branch, reflected=reflected,
        iterations=iters, phi_calls=f.calls,
        contraction_ratio=state["ratio"], bound_constant=bound_c, second=second,
    )


# ---------------------------------------------------------------------------
# correction basis fields
# ---------------------------------------------------------------------------


@dataclass
class CorrectionBasis:
    """Variation fields whose chart images span the attainable directions."""

    V: list                           # rank fields (nu, nv, n)
    V_plus: np.ndarray | None
    V_minus: np.ndarray | None
    masks: list                       # boolean supports of all fields
    jacobian: np.ndarray              # (2, rank): chart images of V_r at build point
    rank: int
    report: VariationReport
    frame: np.ndarray | None          # rows (image_dir, e) in the degenerate case
    sign_plus: float = 0.0            # measured <d2tau(V_plus), e>
    sign_minus: float = 0.0

    @property
    def degenerate(self) -> bool:
        return self.rank == 1


def _smooth_cutoff(grid: GridSpec, excluded: np.ndarray | None, ramp: int = 6) -> np.ndarray:
    """C^1 cutoff that is exactly zero on the excluded index set."""
    if excluded is None or not np.any(excluded):
        return np.ones(grid.shape)
    level = np.full(grid.shape, ramp, dtype=float)
    current = excluded.astype(bool)
    level[current] = 0.0
    for k in range(1, ramp):
        grown = (
            current
            | np.roll(current, 1, 0) | np.roll(current, -1, 0)
            | np.roll(current, 1, 1) | np.roll(current, -1, 1)
        )
        ring = grown & ~current
        level[ring] = k
        current = grown
    t = np.clip(level / ramp, 0.0, 1.0)
    cut = t * t * (3.0 - 2.0 * t)
    cut[excluded.astype(bool)] = 0.0
    return cut


def _bump_profile(t: np.ndarray) -> np.ndarray:
    """C^infinity bump supported on |t| < 1/2."""
    out = np.zeros_like(t)
    inside = np.abs(t) < 0.5
    x = t[inside] * 2.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - x * x))
    return out


def _make_bump(
    ctx: VariationContext,
    x0_idx: tuple[int, int],
    radius: float,
    aspect_swap: bool,
) -> np.ndarray:
    """Product bump xi(y1) tau(y2) in 45-degree-rotated conformal coordinates.

    The paper's aspect trick: with xi(t) = tau(2t) the cross-derivative
    integral int d_1 eta d_2 eta is positive; swapping xi and tau flips its
    sign.  Returns the scalar profile field.
    """
    grid = ctx.grid
    u, v = grid.mesh()
    u0, v0 = u[x0_idx], v[x0_idx]
    du = (u - u0 + 0.5) % 1.0 - 0.5
    dv = (v - v0 + 0.5) % 1.0 - 0.5
    z0 = ctx.structure.zeta[x0_idx]
    J = np.array([[z0[0].real, z0[1].real], [z0[0].imag, z0[1].imag]])
    y1 = J[0, 0] * du + J[0, 1] * dv
    y2 = J[1, 0] * du + J[1, 1] * dv
    s = 1.0 / np.sqrt(2.0)
    yt1 = s * (y1 + y2)
    yt2 = s * (-y1 + y2)
    if aspect_swap:
        return _bump_profile(2.0 * yt2 / radius) * _bump_profile(yt1 / radius)
    return _bump_profile(2.0 * yt1 / radius) * _bump_profile(yt2 / radius)


def build_basis_fields(
    ctx: VariationContext | Immersion,
    report: VariationReport | None = None,
    excluded_region: np.ndarray | None = None,
    bump_radius_cells: int = 14,
    band_limit: float | None = None,
    orthonormalize: bool = True,
) -> CorrectionBasis:
    """Construct correction fields V_r (and V_+/V_- when degenerate).

    V_r are the masked constraint-gradient fields, re-mixed so the chart
    Jacobian is the identity on the attainable subspace.  In the degenerate
    case two rotated product bumps are placed at a point maximizing |A0|
    outside the excluded region, their chart velocity is cancelled with V_1,
    and the pair is labeled by the measured sign of <d2tau(V), e>.

    ``band_limit`` low-passes the linear fields (used by the minimizer so
    repeated corrections cannot seed grid-scale content); it is incompatible
    with exact support masking and therefore skipped when an excluded
    region is given.
    """
    if isinstance(ctx, Immersion):
        ctx = variation_context(ctx)
    if report is None:
        report = rank_report(ctx)
    grid = ctx.grid
    cutoff = _smooth_cutoff(grid, excluded_region)
    phi = ctx.constraint_gradients()
    masked = [cutoff[..., None] * phi[r] for r in range(2)]
    if band_limit is not None and excluded_region is None:
        from .grid import spectral_lowpass

        masked = [spectral_lowpass(m, grid, band_limit) for m in masked]

    if report.rank == 2:
        J = np.stack([first_variation(ctx, m) for m in masked], axis=1)  # (2, 2)
        if abs(np.linalg.det(J)) < 1e-14:
            raise CorrectionError("cannot build correction basis: singular Jacobian")
        if orthonormalize:
            # re-mix so the chart Jacobian is the identity; near degeneracy
            # this inflates the fields by ~1/sqrt(eigenvalue ratio), so
            # callers handling large drifts pass orthonormalize=False
            B = np.linalg.inv(J)
            V = [B[0, 0] * masked[0] + B[1, 0] * masked[1],
                 B[0, 1] * masked[0] + B[1, 1] * masked[1]]
        else:
            # column normalization only: equalizes response scales without
            # mixing (no near-parallel inversion, no field inflation)
            V = [masked[r] / max(np.linalg.norm(J[:, r]), 1e-30) for r in range(2)]
        Jnew = np.stack([first_variation(ctx, w) for w in V], axis=1)
        masks = [np.abs(w).sum(axis=-1) > 0 for w in V]
        return CorrectionBasis(
            V=V, V_plus=None, V_minus=None, masks=masks, jacobian=Jnew,
            rank=2, report=report, frame=None,
        )

    # degenerate case: one linear field along the image direction
    e = report.null_direction
    m_dir = report.image_direction
    w_img = np.linalg.eigh(report.gram)[1][:, 1]
    V1 = cutoff[..., None] * (w_img[0] * phi[0] + w_img[1] * phi[1])
    d1 = first_variation(ctx, V1)
    scale = float(d1 @ m_dir)
    if abs(scale) < 1e-14:
        raise CorrectionError("cannot build correction basis: vanishing image response")
    V1 = V1 / scale

    # bump placement: maximize |A0| outside the excluded region, with room
    a0_mag = np.sqrt(np.maximum(ctx.cache.norm_sq(ctx.cache.A0), 0.0))
    allowed = cutoff > 0.99
    if not np.any(allowed):
        raise CorrectionError("cannot build correction basis: excluded region covers the torus")
    score = np.where(allowed, a0_mag, -np.inf)
    x0_idx = np.unravel_index(int(np.argmax(score)), grid.shape)
    if not np.isfinite(score[x0_idx]) or a0_mag[x0_idx] <= 0:
        raise CorrectionError("cannot build correction basis: excluded region covers supp |A0|")

    # ambient normal direction at x0, projected to the normal bundle
    c = ctx.cache
    n = ctx.f.ambient_dim
    fu0 = c.df[x0_idx][0]
    fv0 = c.df[x0_idx][1]
    if n == 3:
        N0 = np.cross(fu0, fv0)
    else:
        A0_00 = c.A0[x0_idx][0, 0]
        N0 = A0_00 if np.linalg.norm(A0_00) > 1e-12 else c.H[x0_idx]
    N0 = N0 / np.linalg.norm(N0)
    from .geometry import projections as _proj

    N_field = np.broadcast_to(N0, ctx.f.points.shape).copy()
    _, N_field = _proj(c, N_field)

    # conformal-units radius: requested number of grid cells
    zscale = float(np.abs(ctx.structure.zeta[x0_idx]).max())
    radius = bump_radius_cells * max(grid.h_u, grid.h_v) * zscale

    bumps = []
    signs = []
    for aspect_swap in (False, True):
        prof = _make_bump(ctx, x0_idx, radius, aspect_swap)
        if excluded_region is not None and np.any(prof[excluded_region.astype(bool)] != 0.0):
            raise CorrectionError("cannot build correction basis: bump hits excluded region")
        Vb = prof[..., None] * N_field
        gamma = float(first_variation(ctx, Vb) @ m_dir)
        Vb = Vb - gamma * V1
        bumps.append(Vb)
        # sign determination only; a loose least-squares tolerance suffices
        signs.append(float(second_variation(ctx, Vb, lsmr_tol=1e-7, lsmr_maxiter=700) @ e))
    if signs[0] * signs[1] >= 0.0:
        raise CorrectionError(
            f"cannot build correction basis: bump signs do not split ({signs})"
        )
    if signs[0] > 0:
        V_plus, V_minus = bumps[0], bumps[1]
        s_plus, s_minus = signs[0], signs[1]
    else:
        V_plus, V_minus = bumps[1], bumps[0]
        s_plus, s_minus = signs[1], signs[0]

    masks = [np.abs(V1).sum(axis=-1) > 0,
             np.abs(V_plus).sum(axis=-1) > 0,
             np.abs(V_minus).sum(axis=-1) > 0]
    frame = np.stack([m_dir, e])
    return CorrectionBasis(
        V=[V1], V_plus=V_plus, V_minus=V_minus, masks=masks,
        jacobian=first_variation(ctx, V1).reshape(2, 1),
        rank=1, report=report, frame=frame,
        sign_plus=s_plus, sign_minus=s_minus,
    )


# ---------------------------------------------------------------------------
# correction drivers
# ---------------------------------------------------------------------------


def _chart_of(f: Immersion, tracker: ModulusTracker | None = None) -> np.ndarray:
    g = pullback_metric(f, lane="spectral")
    if tracker is not None:
        return chart(tracker.compute(g))
    return chart(modulus(g, f.grid))


@dataclass
class CorrectionResult:
    coefficients: np.ndarray
    mu: float = 0.0
    nu: float = 0.0
    iterations: int = 0
    distance: float = 0.0
    bound_constant: float = 0.0
    branch: str = "full"


def correct_full_rank(
    f_pert: Immersion,
    basis: CorrectionBasis,
    tau_target: TeichmullerPoint | complex,
    tol_tau: float = 1e-8,
    trust_radius: float = 0.1,
    max_iter: int = 30,
    refresh_jacobian: bool = True,
    svd_rcond: float = 0.0,
) -> CorrectionResult:
    """Newton iteration in the correction coefficients (full-rank case).

    Drives chart(modulus((f_pert + lambda_r V_r)^* g_euc)) to the target
    chart point; the Jacobian comes from first_variation (recomputed each
    step unless frozen at the build-time value).
    """
    if basis.rank != 2:
        raise CorrectionError("correct_full_rank needs a rank-2 basis")
    tracker = ModulusTracker(f_pert.grid)
    target = chart(tau_target)
    lam = np.zeros(2)
    start_chart = _chart_of(f_pert, tracker)
    resid = start_chart - target
    start_dist = teich_distance(complex(*start_chart), complex(*target))
    if start_dist > trust_radius:
        raise CorrectionError(
            f"correction diverged: drift {start_dist:.3e} exceeds trust radius {trust_radius}"
        )
    J = basis.jacobian
    it = 0

    def unresolved(r, Jc):
        # residual component the (possibly truncated) solve can still reach
        if svd_rcond <= 0.0:
            return float(np.linalg.norm(r))
        U, sv, _ = np.linalg.svd(Jc)
        kept = U[:, sv > svd_rcond * sv[0]]
        return float(np.linalg.norm(kept.T @ r))

    while unresolved(resid, J) > tol_tau:
        if it >= max_iter:
            raise CorrectionError("correction diverged: max iterations")
        current = Immersion(
            f_pert.points + lam[0] * basis.V[0] + lam[1] * basis.V[1], f_pert.grid
        )
        if refresh_jacobian and it > 0:
            ctx = variation_context(current)
            J = np.stack([first_variation(ctx, w) for w in basis.V], axis=1)
        if svd_rcond > 0.0:
            # never invert weak directions: their linear response is
            # second-order dominated and Newton on them injects deformation
            delta = np.linalg.pinv(J, rcond=svd_rcond) @ resid
        else:
            delta = np.linalg.solve(J, resid)
        # damped Newton: cap the per-step coefficient motion
        cap = max(trust_radius, 1e-2)
        nd = float(np.linalg.norm(delta))
        if nd > cap:
            delta *= cap / nd
        lam = lam - delta
        if np.linalg.norm(lam) > 10.0 * max(trust_radius, 1e-2):
            raise CorrectionError("correction diverged: coefficients exploded")
        current = Immersion(
            f_pert.points + lam[0] * basis.V[0] + lam[1] * basis.V[1], f_pert.grid
        )
        resid = _chart_of(current, tracker) - target
        it += 1
    dist = float(np.linalg.norm(resid))
    C = float(np.linalg.norm(lam) / start_dist) if start_dist > 0 else 0.0
    return CorrectionResult(
        coefficients=lam, iterations=it, distance=dist, bound_constant=C, branch="full",
    )


def _degenerate_chart_map(
    f_pert: Immersion, basis: CorrectionBasis, tracker: ModulusTracker | None = None
):
    """Chart map Phi(lam, mu, nu) in the (image_dir, e) frame, and its base."""
    R = basis.frame
    tracker = tracker or ModulusTracker(f_pert.grid)
    base = _chart_of(f_pert, tracker)

    def Phi(xi):
        lam, mu, nu = xi
        pts = (
            f_pert.points + lam * basis.V[0] + mu * basis.V_plus + nu * basis.V_minus
        )
        return R @ (_chart_of(Immersion(pts, f_pert.grid), tracker) - base)

    return Phi, base, tracker


def estimate_degenerate_constants(
    f_pert: Immersion, basis: CorrectionBasis, probe: float = 1e-2
) -> dict:
    """FD-sample the chart map along the basis directions, margined by x2.

    gamma from the build-time second variations (halved), Lambda from
    second differences of the scalar component along mu/nu/lambda (doubled),
    epsilon from the measured cross couplings (doubled, floored).  Returns
    plain constants, reusable across nearby immersions.
    """
    Phi, _, _ = _degenerate_chart_map(f_pert, basis)
    gamma = 0.5 * min(abs(basis.sign_plus), abs(basis.sign_minus))
    d2 = []
    eps = []
    f0 = Phi(np.zeros(3))
    for k in range(3):
        e = np.zeros(3); e[k] = probe
        fp, fm = Phi(e), Phi(-e)
        d2.append(np.max(np.abs(fp - 2 * f0 + fm)) / probe**2)
        grad = (fp - fm) / (2 * probe)
        if k == 0:
            eps.append(abs(grad[1]))      # d_lambda phi
        else:
            eps.append(abs(grad[0]))      # d_mu/nu Phi_0
    Lambda = max(2.0 * max(d2), 2.0 * gamma, 1.0)
    epsilon = max(2.0 * max(eps), 1e-6)
    return {"gamma": gamma, "Lambda": Lambda, "epsilon": epsilon}


def correct_degenerate(
    f_pert: Immersion,
    basis: CorrectionBasis,
    tau_target: TeichmullerPoint | complex,
    tol_tau: float = 1e-8,
    lambda0_cap: float = 0.5,
    want_second: bool = False,
    constants: dict | None = None,
    tracker: ModulusTracker | None = None,
) -> CorrectionResult:
    """Degenerate correction through the IFT solver with quadratic bumps.

    The chart map is expressed in the (image_dir, e) frame where the
    lambda block is near-identity and the null direction is the scalar
    component; mu, nu multiply V_+, V_- and satisfy mu nu = 0.
    """
    if basis.rank != 1 or basis.V_plus is None:
        raise CorrectionError("correct_degenerate needs a degenerate basis with bumps")
    if constants is None:
        constants = estimate_degenerate_constants(f_pert, basis)
    gamma = constants["gamma"]
    Lambda = constants["Lambda"]
    epsilon = constants["epsilon"]
    Phi, base, tracker = _degenerate_chart_map(f_pert, basis, tracker)
    eta = basis.frame @ (chart(tau_target) - base)

    drift0 = abs(float(eta[0]))
    drift_e = abs(float(eta[1]))
    lam0 = 2.0 * max(
        np.sqrt(max(drift0, 1e-30) / Lambda),
        8.0 * drift0,
        np.sqrt(32.0 * drift_e / gamma),
        1e-6,
    )
    lam0 = min(lam0, lambda0_cap)
    if drift_e > gamma * lam0**2 / 32.0 or drift0 > min(Lambda * lam0**2, lam0 / 8.0):
        raise CorrectionError(
            "correction diverged: drift too large for the degenerate trust region"
        )

    problem = IFTProblem(
        phi=Phi, M=1, epsilon=epsilon, gamma=gamma,
        lambda_cap=Lambda, lambda0=lam0, eta=eta,
    )
    res = ift_solve(problem, want_second=want_second, scalar_ftol=tol_tau * 1e-2)
    lam, mu, nu = float(res.xi[0]), res.mu, res.nu
    corrected = Immersion(
        f_pert.points + lam * basis.V[0] + mu * basis.V_plus + nu * basis.V_minus,
        f_pert.grid,
    )
    dist = teich_distance(
        complex(*_chart_of(corrected, tracker)),
        tau_target.tau if isinstance(tau_target, TeichmullerPoint) else complex(tau_target),
    )
    if dist > tol_tau * 10.0:
        raise CorrectionError(f"correction diverged: residual class error {dist:.3e}")
    return CorrectionResult(
        coefficients=np.array([lam]), mu=mu, nu=nu,
        iterations=res.iterations, distance=dist,
        bound_constant=res.bound_constant, branch=res.branch,
    )
