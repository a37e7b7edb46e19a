"""Invariant batteries behind the `verify` CLI command.

Each module contributes a list of fast, seeded checks (small grids, a few
seconds total) asserting the properties the library is built on.  The
pytest suite covers the same ground more thoroughly; this battery is the
self-contained runtime health check.
"""

from __future__ import annotations

import numpy as np

from . import grid as g
from .geometry import (
    GeometryError,
    Immersion,
    curvature,
    el_operator,
    gauss_bonnet_report,
    l2_norm,
    projections,
    pullback_metric,
    willmore_energy,
)
from .correction import IFTProblem, build_basis_fields, ift_solve
from .minimizer import fit_multiplier, normalize
from .surfaces import (
    clifford_torus,
    random_smooth_normal_field,
    random_smooth_scalar,
    revolution_willmore_energy,
    torus_of_revolution,
)
from .uniformization import (
    conformal_factor,
    constant_metric_modulus,
    metric_gauss_curvature,
    modulus,
    teich_distance,
)
from .variations import (
    decompose,
    first_variation,
    rank_report,
    reconstruct,
    tt_basis,
    variation_context,
)


class Check:
    def __init__(self, name: str, ok: bool, detail: str = ""):
        self.name = name
        self.ok = bool(ok)
        self.detail = detail

    def line(self) -> str:
        mark = "PASS" if self.ok else "FAIL"
        suffix = f"  ({self.detail})" if self.detail else ""
        return f"[{mark}] {self.name}{suffix}"


def _close(a, b, tol):
    return abs(a - b) <= tol


def check_grid() -> list:
    out = []
    spec = g.GridSpec(48, 48)
    u, v = spec.mesh()

    f = np.sin(2 * np.pi * u)
    d = g.partial(f, "u", spec)
    err = np.abs(d - 2 * np.pi * np.cos(2 * np.pi * u)).max()
    out.append(Check("grid.partial sin oracle", err < 1e-4, f"err={err:.2e}"))

    const = np.full(spec.shape, 3.2)
    out.append(Check("grid.partial constant", np.abs(g.partial(const, "v", spec)).max() == 0.0))

    phi = random_smooth_scalar(spec, 7)
    val = g.integrate(g.partial(phi, "u", spec), 1.0, spec)
    out.append(Check("grid summation by parts", abs(val) < 1e-12, f"|int dphi|={abs(val):.1e}"))

    rhs = -((2 * np.pi) ** 2) * np.sin(2 * np.pi * u)
    sol = g.poisson_solve(rhs, spec)
    err = np.abs(sol - np.sin(2 * np.pi * u)).max()
    out.append(Check("grid.poisson single mode", err < 1e-12, f"err={err:.1e}"))

    try:
        g.poisson_solve(rhs + 0.1, spec)
        out.append(Check("grid.poisson solvability guard", False))
    except g.GridError:
        out.append(Check("grid.poisson solvability guard", True))

    X0 = np.stack([np.sin(2 * np.pi * v), np.zeros(spec.shape)], axis=-1)
    dX = np.stack(
        [g.spectral_partial(X0, "u", spec), g.spectral_partial(X0, "v", spec)], axis=2
    )
    sym = dX + np.swapaxes(dX, 2, 3)
    sym -= 0.5 * np.eye(2) * np.trace(sym, axis1=2, axis2=3)[..., None, None]
    X = g.vector_poisson_solve(sym, spec)
    err = np.abs(X - X0).max()
    out.append(Check("grid vector solve round trip", err < 1e-10, f"err={err:.1e}"))
    return out


def check_geometry() -> list:
    out = []
    spec = g.GridSpec(64, 64)
    f = torus_of_revolution(spec, 2.0, 1.0)

    W = willmore_energy(f)
    Wex = revolution_willmore_energy(2.0, 1.0)
    out.append(Check("geometry energy closed form", _close(W, Wex, 1e-3 * Wex), f"W={W:.6f}"))

    rep = gauss_bonnet_report(f)
    ok = (
        abs(rep["int_K"]) < 1e-6
        and _close(rep["W"], rep["quarter_intA2_plus"], 1e-6 * rep["W"])
        and _close(rep["W"], rep["half_intA02_plus"], 1e-6 * rep["W"])
    )
    out.append(Check("geometry Gauss-Bonnet identities", ok, f"intK={rep['int_K']:.1e}"))

    cache = curvature(f)
    err = max(
        float(np.abs(np.einsum("xyija,xya->xyij", cache.A, cache.df[:, :, k])).max())
        for k in range(2)
    )
    out.append(Check("geometry A normality", err < 1e-8, f"err={err:.1e}"))

    W1 = willmore_energy(Immersion(2.5 * f.points + np.array([1.0, 0.0, -2.0]), spec))
    out.append(Check("geometry scale/translation invariance", _close(W1, W, 1e-11 * W)))

    try:
        pullback_metric(Immersion(0.0 * f.points, spec))
        out.append(Check("geometry degenerate-immersion guard", False))
    except GeometryError:
        out.append(Check("geometry degenerate-immersion guard", True))

    V = random_smooth_normal_field(f, seed=3)
    el = el_operator(cache)
    pair = 0.5 * g.integrate(np.einsum("xya,xya->xy", el, V), cache.sqrt_det_g, spec)
    t = 1e-5
    fd = (
        willmore_energy(Immersion(f.points + t * V, spec))
        - willmore_energy(Immersion(f.points - t * V, spec))
    ) / (2 * t)
    out.append(
        Check("geometry EL pairing vs energy", abs(pair - fd) < 5e-3 * abs(fd), f"rel={abs(pair-fd)/abs(fd):.1e}")
    )
    return out


def check_uniformization() -> list:
    out = []
    spec = g.GridSpec(64, 64)
    G = np.array([[2.0, 0.7], [0.7, 1.5]])
    gfield = np.broadcast_to(G, spec.shape + (2, 2)).copy()
    tau = modulus(gfield, spec).tau
    err = abs(tau - constant_metric_modulus(G))
    out.append(Check("uniformization constant-metric modulus", err < 1e-10, f"err={err:.1e}"))

    phi = 0.3 * random_smooth_scalar(spec, 5)
    tau2 = modulus(np.exp(2 * phi)[..., None, None] * gfield, spec).tau
    out.append(Check("uniformization conformal invariance", abs(tau2 - tau) < 1e-8, f"err={abs(tau2-tau):.1e}"))

    u, v = spec.mesh()
    psi = 0.3 * np.sin(2 * np.pi * u) * np.cos(2 * np.pi * v)
    gconf = np.exp(2 * psi)[..., None, None] * np.broadcast_to(np.eye(2), spec.shape + (2, 2))
    cf = conformal_factor(gconf, spec)
    spread = float((cf.u - psi).max() - (cf.u - psi).min())
    out.append(Check("uniformization factor recovery", spread < 1e-6, f"spread={spread:.1e}"))

    Kf = np.abs(metric_gauss_curvature(cf.flat_metric, spec)).max()
    out.append(Check("uniformization flatness", Kf < 1e-6, f"|K|={Kf:.1e}"))

    d = teich_distance(1j, 2j)
    out.append(Check("uniformization teich distance ln2", _close(d, np.log(2), 1e-12)))
    return out


def check_variations() -> list:
    out = []
    spec = g.GridSpec(64, 64)
    basis = tt_basis(np.eye(2))
    ok = _close(basis[0].a, 1 / np.sqrt(2), 1e-14) and _close(basis[1].b, 1 / np.sqrt(2), 1e-14)
    out.append(Check("variations tt_basis delta normalization", ok))

    sigma0 = random_smooth_scalar(spec, 11, rms=0.7)
    X0 = np.stack(
        [random_smooth_scalar(spec, 12, rms=0.5), random_smooth_scalar(spec, 13, rms=0.4)],
        axis=-1,
    )
    X0 -= X0.mean(axis=(0, 1))
    q0 = np.array([[0.3, -0.2], [-0.2, -0.3]])
    S = reconstruct(sigma0, X0, q0, np.eye(2), spec)
    dec = decompose(S, np.eye(2), spec)
    err = max(
        float(np.abs(dec.sigma - sigma0).max()),
        float(np.abs(dec.X - X0).max()),
        float(np.abs(dec.q_matrix - q0).max()),
    )
    out.append(Check("variations decomposition round trip", err < 1e-9, f"err={err:.1e}"))

    f = torus_of_revolution(spec, 2.0, 1.0)
    ctx = variation_context(f)
    V = random_smooth_normal_field(f, seed=7)
    fv, ca, cm, _ = first_variation(ctx, V, return_forms=True)
    out.append(
        Check("variations two-form equality", float(np.abs(ca - cm).max()) < 1e-8,
              f"diff={np.abs(ca-cm).max():.1e}")
    )

    rep = rank_report(ctx)
    out.append(Check("variations revolution rank 1", rep.rank == 1,
                     f"ratio={rep.eigenvalue_ratio:.1e}"))
    from .surfaces import perturbed_torus

    rep2 = rank_report(perturbed_torus(spec, 2.0, 1.0, amplitude=0.05, seed=4))
    out.append(Check("variations perturbed rank 2", rep2.rank == 2,
                     f"ratio={rep2.eigenvalue_ratio:.1e}"))
    return out


def check_correction() -> list:
    out = []
    gamma = 0.5

    def phi(xi):
        lam, mu, nu = xi
        return np.array([lam, gamma * mu**2 - gamma * nu**2])

    p = IFTProblem(phi=phi, M=1, epsilon=1e-6, gamma=gamma, lambda_cap=2.0,
                   lambda0=0.7, eta=np.array([0.0, gamma * 0.01]))
    r = ift_solve(p)
    ok = r.residual < 1e-10 and r.mu * r.nu == 0.0 and abs(abs(r.mu + r.nu) - 0.1) < 1e-6
    out.append(Check("correction ift quadratic root", ok, f"res={r.residual:.1e}"))

    spec = g.GridSpec(48, 48)
    f = torus_of_revolution(spec, 2.0, 1.0)
    ctx = variation_context(f)
    excluded = np.zeros(spec.shape, dtype=bool)
    excluded[:6, :6] = True
    basis = build_basis_fields(ctx, excluded_region=excluded)
    ok = all(
        float(np.abs(Vf[excluded]).max()) == 0.0
        for Vf in ([*basis.V] + [basis.V_plus, basis.V_minus])
        if Vf is not None
    )
    out.append(Check("correction disjoint supports", ok))
    out.append(
        Check("correction bump sign split", basis.sign_plus > 0 > basis.sign_minus,
              f"+{basis.sign_plus:.1e}/{basis.sign_minus:.1e}")
    )
    return out


def check_minimizer() -> list:
    out = []
    spec = g.GridSpec(48, 48)
    f = torus_of_revolution(spec, np.sqrt(2.0), 1.0)
    fn = normalize(f)
    area = curvature(fn).area
    out.append(Check("minimizer unit area", _close(area, 1.0, 1e-12), f"area={area}"))
    fn2 = normalize(Immersion(2.0 * fn.points + np.array([0.3, 0.0, 1.0]), spec))
    out.append(
        Check("minimizer normalize invariance", float(np.abs(fn2.points - fn.points).max()) < 1e-12)
    )

    cf_spec = g.GridSpec(64, 64)
    cf = clifford_torus(cf_spec)
    q, rrel, rabs = fit_multiplier(cf)
    out.append(Check("minimizer Clifford multiplier ~ 0", q.norm < 1e-6 and rabs < 1e-6,
                     f"|q|={q.norm:.1e}, res={rabs:.1e}"))
    return out


BATTERIES = {
    "grid": check_grid,
    "geometry": check_geometry,
    "uniformization": check_uniformization,
    "variations": check_variations,
    "correction": check_correction,
    "minimizer": check_minimizer,
}


def run(filter_name: str | None = None) -> list:
    checks = []
    for name, battery in BATTERIES.items():
        if filter_name and filter_name != name:
            continue
        checks.extend(battery())
    return checks
