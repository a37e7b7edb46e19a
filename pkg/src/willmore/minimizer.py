"""Constrained Willmore gradient descent at fixed Teichmueller class.

Each step moves along the (spectrally smoothed) negative L2 gradient
V = -(1/2) S_h (Delta^perp H + Q(A0) H), corrects the conformal class back
to the target with the full-rank or degenerate machinery, re-normalizes
(centroid to origin, unit area), and accepts by Armijo backtracking on the
corrected immersion's energy.  S_h = (I + alpha Delta^2)^{-1} with
alpha = (kappa h)^4 is an O(h^4)-consistent mollifier of the identity; it
caps the stiffness of the fourth-order flow so that smooth perturbations
relax in O(100) iterations without exciting grid-scale modes.

The Euler-Lagrange multiplier of the constrained problem is the TT tensor q
closest to realizing Delta^perp H + Q(A0) H = g^{ik} g^{jl} A0_ij q_kl in
L2; its residual doubles as the projected-gradient stopping test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .correction import (
    CorrectionBasis,
    CorrectionError,
    build_basis_fields,
    correct_degenerate,
    correct_full_rank,
)
from .geometry import (
    GeometryCache,
    Immersion,
    curvature,
    el_operator,
    gauss_bonnet_report,
    l2_norm,
    willmore_energy,
)
from .grid import GridSpec, integrate
from .uniformization import (
    TeichmullerPoint,
    chart,
    modulus,
    teich_distance,
)
from .variations import TTTensor, VariationContext, rank_report, variation_context
from .geometry import pullback_metric

__all__ = [
    "MinimizeOptions",
    "MinimizeResult",
    "IterationRecord",
    "willmore_threshold",
    "normalize",
    "smooth_direction",
    "fit_multiplier",
    "descent_step",
    "minimize",
    "sweep",
    "MinimizerError",
]

# best known genus-1 energy value (Clifford torus); enters the n = 4 threshold
BETA_1_PI2 = 2.0 * np.pi**2


class MinimizerError(RuntimeError):
    pass


def willmore_threshold(n: int, genus: int = 1) -> float:
    """Energy level below which the fixed-class theory guarantees minimizers.

    For tori in R^3 the value is exactly 8 pi; in R^4 it is
    min(8 pi, beta_1^4 + 8 pi / 3), which also evaluates to 8 pi for the
    best known beta_1^4 = 2 pi^2.
    """
    if genus != 1:
        raise MinimizerError("threshold table only covers genus 1")
    if n == 3:
        return 8.0 * np.pi
    if n == 4:
        return min(8.0 * np.pi, BETA_1_PI2 + 8.0 * np.pi / 3.0)
    raise MinimizerError("ambient dimension must be 3 or 4")


@dataclass
class MinimizeOptions:
    tau_target: complex = 1j
    max_iters: int = 300
    step_init: float = 5e-3
    backtrack_factor: float = 0.5
    armijo_c: float = 1e-4
    tol_grad: float = 1e-3
    tol_tau: float = 1e-6
    energy_ceiling: float | None = None      # defaults to 8 pi - 1e-3
    rng_seed: int = 0
    smoothing_cutoff: float = 8.0            # descent-direction band limit (modes)
    cleanup_every: int = 8                   # Armijo-checked surface low-pass cadence
    degenerate_path_ratio: float = 1e-4      # Gram ratio below which corrections
                                             # use the quadratic (bump) machinery
    step_grow: float = 1.7
    step_min: float = 1e-11
    trust_radius: float = 0.1
    basis_refresh: int = 10                  # degenerate-basis rebuild cadence
    verbose: bool = False

    def __post_init__(self):
        if isinstance(self.tau_target, TeichmullerPoint):
            self.tau_target = self.tau_target.tau
        if not (0.0 < self.backtrack_factor < 1.0 and 0.0 < self.armijo_c < 1.0):
            raise MinimizerError("backtrack_factor and armijo_c must lie in (0, 1)")
        for name in ("max_iters", "step_init", "tol_grad", "tol_tau"):
            if getattr(self, name) <= 0:
                raise MinimizerError(f"{name} must be positive")

    def ceiling(self, n: int) -> float:
        if self.energy_ceiling is not None:
            ceil = self.energy_ceiling
        else:
            ceil = willmore_threshold(n) - 1e-3
        if n == 3 and ceil >= 8.0 * np.pi:
            raise MinimizerError("energy_ceiling must stay below 8 pi for n = 3")
        return ceil


@dataclass
class IterationRecord:
    iteration: int
    energy: float
    tau_re: float
    tau_im: float
    grad_norm: float
    step: float
    corrected_norm: float
    status: str


@dataclass
class MinimizeResult:
    final: Immersion
    energy_trace: list
    tau_trace: list
    multiplier: TTTensor
    el_residual_rel: float
    status: str
    records: list
    gauss_bonnet_drift: float = 0.0


def normalize(f: Immersion) -> Immersion:
    """Translate the area centroid to the origin and scale to unit area."""
    cache = curvature(f)
    area = cache.area
    centroid = np.stack(
        [integrate(f.points[..., a], cache.sqrt_det_g, f.grid) for a in range(f.ambient_dim)]
    ) / area
    pts = (f.points - centroid) / np.sqrt(area)
    return Immersion(pts, f.grid)


def smooth_direction(
    field: np.ndarray, grid: GridSpec, cutoff: float, knee: float = 1.5
) -> np.ndarray:
    """H^2-Sobolev preconditioner: inverse-quartic symbol with sharp band limit.

    Applies S(k) = exp(-(|k|/cutoff)^16) / (1 + (|k|/knee)^4).  The
    inverse-quartic shape flattens the spectrum of the Willmore Hessian
    (fourth order), so Armijo steps contract the whole resolved band at
    comparable rates instead of being throttled by the stiffest mode; the
    sharp cutoff keeps grid-scale content out of the direction entirely.
    S is symmetric positive definite, so descent is preserved.
    """
    n_u, n_v = grid.shape
    ku = np.fft.fftfreq(n_u, d=1.0 / n_u)
    kv = np.fft.fftfreq(n_v, d=1.0 / n_v)
    kabs = np.sqrt(ku[:, None] ** 2 + kv[None, :] ** 2)
    mult = np.exp(-((kabs / cutoff) ** 16)) / (1.0 + (kabs / knee) ** 4)
    out = np.fft.ifft2(mult[..., None] * np.fft.fft2(field, axes=(0, 1)), axes=(0, 1))
    return np.real(out)


def fit_multiplier(
    f: Immersion | GeometryCache,
    ctx: VariationContext | None = None,
    el: np.ndarray | None = None,
) -> tuple[TTTensor, float, float]:
    """Least-squares TT multiplier of the constrained Euler-Lagrange equation.

    Minimizes || EL - g^{ik} g^{jl} A0_ij q_kl ||_{L2(dmu_g)} over the
    2-dimensional TT space.  Returns (q, relative residual, absolute
    residual).  A vanishing EL field (at the grid's roundoff floor) yields
    q = 0 with residual 0.
    """
    cache = f if isinstance(f, GeometryCache) else curvature(f)
    if ctx is None:
        ctx = variation_context(cache.immersion)
    if el is None:
        el = el_operator(cache)
    el_norm = l2_norm(el, cache)
    h_scale = float(np.max(np.abs(cache.H)))
    floor = 500.0 * np.finfo(float).eps * max(h_scale, 1.0) / min(cache.grid.h_u, cache.grid.h_v) ** 2
    if el_norm <= floor:
        return TTTensor(0.0, 0.0), 0.0, 0.0

    # constraint-gradient fields in the FD lane, TT realizations from zeta
    phi = []
    for r in range(2):
        up = np.einsum(
            "xyik,xyjl,xykl->xyij", cache.g_inv, cache.g_inv, ctx.q_fields[r]
        )
        phi.append(np.einsum("xyija,xyij->xya", cache.A0, up))
    G = np.empty((2, 2))
    rhs = np.empty(2)
    for r in range(2):
        rhs[r] = integrate(
            np.einsum("xya,xya->xy", el, phi[r]), cache.sqrt_det_g, cache.grid
        )
        for s in range(r, 2):
            G[r, s] = G[s, r] = integrate(
                np.einsum("xya,xya->xy", phi[r], phi[s]), cache.sqrt_det_g, cache.grid
            )
    c, *_ = np.linalg.lstsq(G, rhs, rcond=None)
    fitted = c[0] * phi[0] + c[1] * phi[1]
    res_abs = l2_norm(el - fitted, cache)
    q = TTTensor.from_h(c[0] * ctx.basis[0].h + c[1] * ctx.basis[1].h)
    return q, res_abs / el_norm, res_abs


@dataclass
class _State:
    f: Immersion
    cache: GeometryCache
    ctx: VariationContext
    basis: CorrectionBasis
    energy: float
    step: float
    rank: int
    degen_constants: dict | None = None
    tracker: object | None = None
    basis_age: int = 0


def _band(grid: GridSpec, opts: MinimizeOptions) -> float:
    """Generous band limit for correction fields and surface cleanups."""
    return min(4.0 * opts.smoothing_cutoff, min(grid.n_u, grid.n_v) / 3.0)


def _build_state(
    f: Immersion, opts: MinimizeOptions, step: float, prev: _State | None = None
) -> _State:
    """Assemble the per-iterate bundle; correction bases are expensive in the
    degenerate case (two second variations plus constants sampling) and are
    reused across slowly moving iterates up to ``basis_refresh`` steps."""
    from .correction import estimate_degenerate_constants
    from .uniformization import ModulusTracker

    cache = curvature(f)
    ctx = variation_context(f)
    report = rank_report(ctx, eps_rank=opts.degenerate_path_ratio)
    if (
        prev is not None
        and prev.rank == report.rank
        and prev.basis_age + 1 < opts.basis_refresh
    ):
        basis = prev.basis
        constants = prev.degen_constants
        if basis.rank == 2:
            # refresh the cheap linear Jacobian at the new point
            from .variations import first_variation as _fv

            basis.jacobian = np.stack([_fv(ctx, w) for w in basis.V], axis=1)
        return _State(
            f=f, cache=cache, ctx=ctx, basis=basis,
            energy=willmore_energy(cache), step=step, rank=report.rank,
            degen_constants=constants, tracker=prev.tracker,
            basis_age=prev.basis_age + 1,
        )
    basis = build_basis_fields(ctx, report, band_limit=_band(f.grid, opts))
    constants = (
        estimate_degenerate_constants(f, basis) if basis.rank == 1 else None
    )
    return _State(
        f=f, cache=cache, ctx=ctx, basis=basis,
        energy=willmore_energy(cache), step=step, rank=report.rank,
        degen_constants=constants, tracker=ModulusTracker(f.grid),
    )


def _correct(f_trial: Immersion, state: _State, opts: MinimizeOptions) -> Immersion:
    basis = state.basis
    if basis.rank == 2:
        res = correct_full_rank(
            f_trial, basis, opts.tau_target, tol_tau=opts.tol_tau * 1e-2,
            trust_radius=opts.trust_radius, refresh_jacobian=False,
        )
        pts = f_trial.points + res.coefficients[0] * basis.V[0] + res.coefficients[1] * basis.V[1]
    else:
        res = correct_degenerate(
            f_trial, basis, opts.tau_target, tol_tau=opts.tol_tau * 1e-2,
            constants=state.degen_constants, tracker=state.tracker,
        )
        pts = (
            f_trial.points
            + res.coefficients[0] * basis.V[0]
            + res.mu * basis.V_plus
            + res.nu * basis.V_minus
        )
    return Immersion(pts, f_trial.grid)


def descent_step(state: _State, opts: MinimizeOptions) -> tuple[_State, IterationRecord, bool]:
    """One Armijo-backtracked, class-corrected, re-normalized descent step.

    The direction is the negative constrained gradient
    -(1/2) S_h (Delta^perp H + Q(A0) H - g^{ik} g^{jl} A0_ij q_kl) with q the
    fitted TT multiplier: subtracting the multiplier part projects out the
    components the class correction would undo anyway, so the Armijo slope
    measures genuine constrained descent.
    """
    f, cache = state.f, state.cache
    el = el_operator(cache)
    q, res_rel, res_abs = fit_multiplier(cache, state.ctx, el)
    q_field = np.real(
        q.h * state.ctx.structure.zeta[..., :, None] * state.ctx.structure.zeta[..., None, :]
    )
    up = np.einsum("xyik,xyjl,xykl->xyij", cache.g_inv, cache.g_inv, q_field)
    el_constrained = el - np.einsum("xyija,xyij->xya", cache.A0, up)
    grad_full = 0.5 * el
    direction = -smooth_direction(0.5 * el_constrained, f.grid, opts.smoothing_cutoff)
    # class-neutralize: the projected gradient is chart-neutral by the normal
    # equations, but the Sobolev smoother breaks that; cancel with the basis.
    from .variations import first_variation

    dtau = first_variation(state.ctx, direction)
    if state.basis.rank == 2:
        c = np.linalg.solve(state.basis.jacobian, dtau)
        direction = direction - c[0] * state.basis.V[0] - c[1] * state.basis.V[1]
    else:
        Jcol = state.basis.jacobian[:, 0]
        c0 = float(Jcol @ dtau) / float(Jcol @ Jcol)
        direction = direction - c0 * state.basis.V[0]
    slope = -integrate(
        np.einsum("xya,xya->xy", grad_full, direction), cache.sqrt_det_g, f.grid
    )
    grad_norm = 0.5 * res_abs  # projected-gradient norm
    if slope <= 0.0:
        # no descent left transverse to the constraint: constrained critical
        tau = state.ctx.tau
        rec = IterationRecord(
            iteration=0, energy=state.energy, tau_re=tau.real, tau_im=tau.imag,
            grad_norm=grad_norm, step=0.0, corrected_norm=0.0, status="stalled",
        )
        return state, rec, False

    from .geometry import GeometryError
    from .uniformization import UniformizationError

    t = state.step
    corrected_norm = 0.0
    while t >= opts.step_min:
        trial = Immersion(f.points + t * direction, f.grid)
        try:
            corrected = _correct(trial, state, opts)
            corrected = normalize(corrected)
            energy = willmore_energy(corrected)
            if energy <= state.energy - opts.armijo_c * t * slope:
                new_state = _build_state(corrected, opts, min(t * opts.step_grow, 1.0), prev=state)
            else:
                t *= opts.backtrack_factor
                continue
        except (CorrectionError, GeometryError, UniformizationError):
            t *= opts.backtrack_factor
            continue
        corrected_norm = float(np.linalg.norm(corrected.points - trial.points))
        tau = new_state.ctx.tau
        rec = IterationRecord(
            iteration=0, energy=energy, tau_re=tau.real, tau_im=tau.imag,
            grad_norm=grad_norm, step=t, corrected_norm=corrected_norm,
            status="accepted",
        )
        return new_state, rec, True

    tau = state.ctx.tau
    rec = IterationRecord(
        iteration=0, energy=state.energy, tau_re=tau.real, tau_im=tau.imag,
        grad_norm=grad_norm, step=t, corrected_norm=corrected_norm, status="stalled",
    )
    return state, rec, False


def _try_cleanup(state: _State, opts: MinimizeOptions) -> _State | None:
    """Armijo-checked spectral low-pass of the surface.

    Grid-scale content (seeded by roundoff and aliasing) carries huge
    Euler-Lagrange amplitudes at negligible energy; removing it when doing
    so does not increase the energy keeps the gradient field clean.
    """
    from .grid import spectral_lowpass
    from .geometry import GeometryError
    from .uniformization import UniformizationError

    try:
        pts = spectral_lowpass(state.f.points, state.f.grid, _band(state.f.grid, opts))
        cand = _correct(Immersion(pts, state.f.grid), state, opts)
        cand = normalize(cand)
        energy = willmore_energy(cand)
        if energy <= state.energy + 1e-13 * max(1.0, abs(state.energy)):
            return _build_state(cand, opts, state.step, prev=state)
    except (CorrectionError, GeometryError, UniformizationError):
        pass
    return None


def drive_to_class(
    f: Immersion, tau_target: complex, opts: MinimizeOptions
) -> Immersion:
    """Walk the class toward the target in trust-radius hops.

    Pre-positioning only: the walk stops at a coarse tolerance (the descent
    loop's own per-iterate corrections enforce tol_tau on accepted
    iterates).  Weak, nearly degenerate directions are corrected only as
    far as their linear response is reliable; failed hops retry at half
    length.
    """
    from .grid import spectral_lowpass
    from .geometry import GeometryError
    from .uniformization import UniformizationError

    current = modulus(pullback_metric(f, lane="spectral"), f.grid).tau
    target = complex(tau_target)
    tol_walk = max(1e-4, opts.tol_tau)
    hop = min(0.8 * opts.trust_radius, 0.05)
    for _ in range(60):
        d = teich_distance(current, target)
        if d <= tol_walk:
            return f
        # strip grid-scale residue of earlier bump corrections; the class
        # shift this causes is absorbed by the hop correction right below
        f_try = Immersion(spectral_lowpass(f.points, f.grid, _band(f.grid, opts)), f.grid)
        frac = min(1.0, hop / d)
        step_tau = current + frac * (target - current)  # chart-line interpolation
        ctx = variation_context(f_try)
        report = rank_report(ctx, eps_rank=opts.degenerate_path_ratio)
        # large hops cannot tolerate the field inflation of a nearly singular
        # re-orthonormalization: keep the raw constraint-gradient fields
        # (column-normalized) and damped frozen-Jacobian iteration
        basis = build_basis_fields(ctx, report, orthonormalize=False)
        try:
            if basis.rank == 2:
                res = correct_full_rank(
                    f_try, basis, step_tau, tol_tau=max(2e-5, opts.tol_tau * 1e-2),
                    trust_radius=opts.trust_radius, refresh_jacobian=False,
                    max_iter=12, svd_rcond=0.05,
                )
                pts = f_try.points + res.coefficients[0] * basis.V[0] + res.coefficients[1] * basis.V[1]
            else:
                res = correct_degenerate(
                    f_try, basis, step_tau, tol_tau=max(2e-5, opts.tol_tau * 1e-2)
                )
                pts = (
                    f_try.points + res.coefficients[0] * basis.V[0]
                    + res.mu * basis.V_plus + res.nu * basis.V_minus
                )
        except (CorrectionError, GeometryError, UniformizationError) as exc:
            hop *= 0.5
            if hop < 1e-4:
                raise CorrectionError(f"drive_to_class: hop collapsed ({exc})")
            continue
        f = normalize(Immersion(pts, f_try.grid))
        current = modulus(pullback_metric(f, lane="spectral"), f.grid).tau
        hop = min(hop * 1.3, min(0.8 * opts.trust_radius, 0.05))
    raise CorrectionError("drive_to_class: no convergence to the target class")


def minimize(f0: Immersion, opts: MinimizeOptions) -> MinimizeResult:
    """Minimize the Willmore energy at fixed Teichmueller class."""
    ceiling = opts.ceiling(f0.ambient_dim)
    f = normalize(f0)
    f = drive_to_class(f, opts.tau_target, opts)
    state = _build_state(f, opts, opts.step_init)

    records: list[IterationRecord] = []
    energy_trace = [state.energy]
    tau_trace = [state.ctx.tau]
    ceiling_hit = state.energy >= ceiling
    status = "max_iters"
    gb_drift = 0.0

    for it in range(opts.max_iters):
        gb = gauss_bonnet_report(state.cache)
        gb_drift = max(gb_drift, abs(gb["int_K"]))
        try:
            state, rec, accepted = descent_step(state, opts)
        except CorrectionError:
            status = "correction_failed"
            rec = IterationRecord(
                iteration=it, energy=state.energy, tau_re=state.ctx.tau.real,
                tau_im=state.ctx.tau.imag, grad_norm=float("nan"), step=0.0,
                corrected_norm=0.0, status="correction_failed",
            )
            records.append(rec)
            break
        rec.iteration = it
        records.append(rec)
        if accepted:
            energy_trace.append(state.energy)
            tau_trace.append(state.ctx.tau)
            if state.energy >= ceiling:
                ceiling_hit = True
        if opts.cleanup_every and accepted and (it + 1) % opts.cleanup_every == 0:
            state2 = _try_cleanup(state, opts)
            if state2 is not None:
                state = state2
                energy_trace.append(state.energy)
                tau_trace.append(state.ctx.tau)
        if opts.verbose:
            print(
                f"  iter {it:4d}: W = {rec.energy:.8f}, |grad| = {rec.grad_norm:.3e}, "
                f"t = {rec.step:.2e}, tau = {rec.tau_re:+.6f}+{rec.tau_im:.6f}i [{rec.status}]"
            )
        q, res_rel, res_abs = fit_multiplier(state.cache, state.ctx)
        if 0.5 * res_abs <= opts.tol_grad:
            status = "converged"
            break
        if not accepted:
            status = "converged"
            break

    q, res_rel, _ = fit_multiplier(state.cache, state.ctx)
    if ceiling_hit:
        status = "ceiling_exceeded"
    return MinimizeResult(
        final=state.f, energy_trace=energy_trace, tau_trace=tau_trace,
        multiplier=q, el_residual_rel=res_rel, status=status, records=records,
        gauss_bonnet_drift=gb_drift,
    )


def sweep(f0: Immersion, tau_list, opts: MinimizeOptions):
    """Warm-started minimization along a list of target classes."""
    results = []
    f = f0
    for tau in tau_list:
        o = MinimizeOptions(**{**opts.__dict__, "tau_target": tau})
        res = minimize(f, o)
        results.append((complex(tau), res.energy_trace[-1], res))
        f = res.final
    return results
