"""Command-line drivers: analyze, minimize, sweep, verify, ift-demo.

Configuration is a flat key=value text file; command-line flags override
file values.  Reports are JSON, iteration logs CSV (columns iter, energy,
tau_re, tau_im, grad_norm, step, corrected_norm, status), meshes OBJ.
Exit codes: 0 success, 1 numerical failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .correction import CorrectionError, IFTProblem, check_ift_hypotheses, ift_solve
from .geometry import (
    GeometryError,
    Immersion,
    curvature,
    el_operator,
    gauss_bonnet_report,
    l2_norm,
    willmore_energy,
    pullback_metric,
)
from .grid import GridError, GridSpec, integrate, spectral_partial
from .minimizer import (
    MinimizeOptions,
    MinimizerError,
    fit_multiplier,
    minimize,
    normalize,
    sweep,
    willmore_threshold,
)
from .surfaces import clifford_torus, perturbed_torus, torus_of_revolution
from .uniformization import UniformizationError, conformal_structure, modulus
from .variations import rank_report, variation_context

NUMERIC_ERRORS = (
    CorrectionError,
    GeometryError,
    GridError,
    MinimizerError,
    UniformizationError,
    np.linalg.LinAlgError,
)

CSV_HEADER = "iter,energy,tau_re,tau_im,grad_norm,step,corrected_norm,status"


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "grid": 64,
    "fd_order": 4,
    "surface": "torus_of_revolution",
    "R": float(np.sqrt(2.0)),
    "r": 1.0,
    "amplitude": 0.05,
    "seed": 0,
    "tau_re": 0.0,
    "tau_im": 1.0,
    "max_iters": 300,
    "tol_grad": 1e-3,
    "tol_tau": 1e-6,
    "out": "out",
    "filter": "",
    "in_path": "",
    "sweep_lo": 0.8,
    "sweep_hi": 1.25,
    "sweep_n": 10,
    "sweep_iters": 40,
}

_TYPES = {k: type(v) for k, v in DEFAULTS.items()}


def load_config(path: str | None, overrides: dict) -> dict:
    cfg = dict(DEFAULTS)
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {path}")
        for lineno, line in enumerate(p.read_text().splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            cfg[key] = _TYPES[key](val) if _TYPES[key] is not str else val
    for key, val in overrides.items():
        if val is not None:
            cfg[key] = val
    return cfg


def make_surface(cfg: dict) -> Immersion:
    grid = GridSpec(int(cfg["grid"]), int(cfg["grid"]), int(cfg["fd_order"]))
    name = cfg["surface"]
    if name == "torus_of_revolution":
        return torus_of_revolution(grid, float(cfg["R"]), float(cfg["r"]))
    if name == "clifford":
        return clifford_torus(grid)
    if name == "perturbed":
        return perturbed_torus(
            grid, float(cfg["R"]), float(cfg["r"]),
            amplitude=float(cfg["amplitude"]), seed=int(cfg["seed"]),
        )
    if name == "from_file":
        if not cfg["in_path"]:
            raise ConfigError("surface=from_file requires in_path")
        return load_mesh(cfg["in_path"])
    raise ConfigError(f"unknown surface generator {name!r}")


# ---------------------------------------------------------------------------
# mesh I/O
# ---------------------------------------------------------------------------


def save_mesh(f: Immersion, out_dir: Path, stem: str = "mesh") -> list:
    """Write the immersion as OBJ (quads split to triangles, row-major).

    Meshes in R^4 are exported as two planar OBJs for the coordinate pairs
    (x1, x2) and (x3, x4) plus a raw coordinate table; the table is the
    authoritative round-trip format.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    n_u, n_v = f.grid.shape
    paths = []

    def write_obj(path: Path, coords: np.ndarray):
        lines = [f"# grid {n_u} {n_v}", f"# ambient {f.ambient_dim}"]
        for i in range(n_u):
            for j in range(n_v):
                x, y, z = coords[i, j]
                lines.append(f"v {x:.17g} {y:.17g} {z:.17g}")
        for i in range(n_u):
            for j in range(n_v):
                a = i * n_v + j + 1
                b = ((i + 1) % n_u) * n_v + j + 1
                c = ((i + 1) % n_u) * n_v + (j + 1) % n_v + 1
                d = i * n_v + (j + 1) % n_v + 1
                lines.append(f"f {a} {b} {c}")
                lines.append(f"f {a} {c} {d}")
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)

    if f.ambient_dim == 3:
        write_obj(out_dir / f"{stem}.obj", f.points)
    else:
        zeros = np.zeros(f.grid.shape)
        write_obj(out_dir / f"{stem}_x12.obj",
                  np.stack([f.points[..., 0], f.points[..., 1], zeros], axis=-1))
        write_obj(out_dir / f"{stem}_x34.obj",
                  np.stack([f.points[..., 2], f.points[..., 3], zeros], axis=-1))
        table = out_dir / f"{stem}_coords.csv"
        with table.open("w") as fh:
            fh.write(f"# grid {n_u} {n_v}\n")
            fh.write("x1,x2,x3,x4\n")
            for i in range(n_u):
                for j in range(n_v):
                    fh.write(",".join(f"{c:.17g}" for c in f.points[i, j]) + "\n")
        paths.append(table)
    return paths


def load_mesh(path: str) -> Immersion:
    """Re-import a mesh written by save_mesh (OBJ for R^3, table for R^4)."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"mesh file not found: {path}")
    lines = p.read_text().splitlines()
    dims = None
    for line in lines:
        if line.startswith("# grid"):
            _, _, nu, nv = line.split()
            dims = (int(nu), int(nv))
            break
    if dims is None:
        raise ConfigError(f"{path}: missing '# grid n_u n_v' header")
    n_u, n_v = dims
    if p.suffix == ".obj":
        verts = [
            [float(t) for t in line.split()[1:4]]
            for line in lines
            if line.startswith("v ")
        ]
        if len(verts) != n_u * n_v:
            raise ConfigError(f"{path}: vertex count does not match grid")
        pts = np.array(verts).reshape(n_u, n_v, 3)
    else:
        rows = [
            [float(t) for t in line.split(",")]
            for line in lines
            if line and not line.startswith("#") and not line.startswith("x1")
        ]
        if len(rows) != n_u * n_v:
            raise ConfigError(f"{path}: row count does not match grid")
        pts = np.array(rows).reshape(n_u, n_v, -1)
    return Immersion(pts, GridSpec(n_u, n_v))


def _fmt(x) -> str:
    return f"{x:.17g}"


def write_log(records, path: Path):
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            ",".join(
                [
                    str(r.iteration), _fmt(r.energy), _fmt(r.tau_re), _fmt(r.tau_im),
                    _fmt(r.grad_norm), _fmt(r.step), _fmt(r.corrected_norm), r.status,
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_analyze(cfg: dict) -> int:
    f = normalize(make_surface(cfg))
    cache = curvature(f)
    grid = f.grid
    report = gauss_bonnet_report(cache)
    structure = conformal_structure(pullback_metric(f, lane="spectral"), grid)
    du = np.stack(
        [spectral_partial(structure.u, "u", grid), spectral_partial(structure.u, "v", grid)],
        axis=-1,
    )
    ginv = np.linalg.inv(cache.g)
    grad_u_sq = np.einsum("xyij,xyi,xyj->xy", ginv, du, du)
    ctx = variation_context(f)
    rank = rank_report(ctx)
    q, res_rel, res_abs = fit_multiplier(cache, ctx)
    out = {
        "surface": cfg["surface"],
        "grid": grid.shape,
        "ambient_dim": f.ambient_dim,
        "energy": report["W"],
        "gauss_bonnet": {
            "quarter_intA2_plus": report["quarter_intA2_plus"],
            "half_intA02_plus": report["half_intA02_plus"],
            "int_K": report["int_K"],
        },
        "tau": [structure.tau.real, structure.tau.imag],
        "conformal_factor": {
            "u_sup": float(np.abs(structure.u).max()),
            "grad_u_l2": float(np.sqrt(integrate(grad_u_sq, cache.sqrt_det_g, grid))),
        },
        "rank": {
            "rank": rank.rank,
            "gram": rank.gram.tolist(),
            "eigenvalue_ratio": rank.eigenvalue_ratio,
            "annihilator": None if rank.annihilator is None else [rank.annihilator.a, rank.annihilator.b],
            "null_direction": None if rank.null_direction is None else rank.null_direction.tolist(),
        },
        "multiplier": {"a": q.a, "b": q.b, "el_residual_rel": res_rel, "el_residual_abs": res_abs},
        "threshold": willmore_threshold(f.ambient_dim),
    }
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "analyze.json"
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(f"energy = {report['W']:.6f}, tau = {structure.tau:.6f}, rank = {rank.rank}")
    print(f"report written to {path}")
    return 0


def _options_from(cfg: dict) -> MinimizeOptions:
    return MinimizeOptions(
        tau_target=complex(float(cfg["tau_re"]), float(cfg["tau_im"])),
        max_iters=int(cfg["max_iters"]),
        tol_grad=float(cfg["tol_grad"]),
        tol_tau=float(cfg["tol_tau"]),
    )


def cmd_minimize(cfg: dict) -> int:
    f0 = make_surface(cfg)
    opts = _options_from(cfg)
    res = minimize(f0, opts)
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    write_log(res.records, out_dir / "minimize_log.csv")
    save_mesh(res.final, out_dir, stem="final")
    summary = {
        "status": res.status,
        "energy_initial": res.energy_trace[0],
        "energy_final": res.energy_trace[-1],
        "tau_final": [res.tau_trace[-1].real, res.tau_trace[-1].imag],
        "multiplier": [res.multiplier.a, res.multiplier.b],
        "el_residual_rel": res.el_residual_rel,
        "iterations": len(res.records),
        "gauss_bonnet_drift": res.gauss_bonnet_drift,
    }
    (out_dir / "minimize.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(
        f"status = {res.status}: W {res.energy_trace[0]:.6f} -> {res.energy_trace[-1]:.6f} "
        f"in {len(res.records)} iterations"
    )
    if res.status == "correction_failed":
        return 1
    if res.status == "ceiling_exceeded":
        return 3
    return 0


def cmd_sweep(cfg: dict) -> int:
    f0 = make_surface(cfg)
    lo, hi, n = float(cfg["sweep_lo"]), float(cfg["sweep_hi"]), int(cfg["sweep_n"])
    taus = [complex(0.0, s) for s in np.linspace(lo, hi, n)]
    opts = _options_from(cfg)
    opts.max_iters = int(cfg["sweep_iters"])
    results = sweep(f0, taus, opts)
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["tau_re,tau_im,energy,status"]
    for tau, energy, res in results:
        lines.append(f"{_fmt(tau.real)},{_fmt(tau.imag)},{_fmt(energy)},{res.status}")
    (out_dir / "sweep.csv").write_text("\n".join(lines) + "\n")
    for tau, energy, res in results:
        print(f"tau = {tau.imag:.4f}i: M = {energy:.6f} [{res.status}]")
    return 0


def cmd_verify(cfg: dict) -> int:
    from . import verify as verify_mod

    checks = verify_mod.run(cfg["filter"] or None)
    if not checks:
        print(f"no verify battery matches filter {cfg['filter']!r}", file=sys.stderr)
        return 2
    failed = 0
    for c in checks:
        print(c.line())
        failed += 0 if c.ok else 1
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 0 if failed == 0 else 1


def cmd_ift_demo(cfg: dict) -> int:
    gamma = 0.5
    eps = 1e-3
    print("synthetic quadratic family: Phi0 = lam + eps sin(mu), "
          "phi = gamma mu^2 - gamma nu^2 + eps lam")

    def make_phi(eps_c):
        def phi(xi):
            lam, mu, nu = xi
            return np.array(
                [lam + eps_c * np.sin(mu), gamma * mu**2 - gamma * nu**2 + eps_c * lam]
            )
        return phi

    all_ok = True
    for eps_c, eta_bar in [(0.0, 0.0), (0.0, gamma * 0.01), (eps, gamma * 0.005), (eps, -gamma * 0.004)]:
        problem = IFTProblem(
            phi=make_phi(eps_c), M=1, epsilon=max(2.5 * eps_c, 1e-6), gamma=gamma,
            lambda_cap=2.0, lambda0=0.7, eta=np.array([0.0, eta_bar]),
        )
        hyp = check_ift_hypotheses(problem)
        res = ift_solve(problem, want_second=True)
        ok = res.residual < 1e-10 and res.mu * res.nu == 0.0 and res.bound_constant <= 10.0
        all_ok = all_ok and ok and hyp["ok"]
        print(
            f"eta_bar={eta_bar:+.4f}: xi=({res.xi[0]:+.5f}, {res.mu:+.5f}, {res.nu:+.5f}) "
            f"residual={res.residual:.1e} C={res.bound_constant:.2f} branch={res.branch} "
            f"hyp_ok={hyp['ok']} second={'yes' if res.second is not None else 'no'}"
        )
    print("all bounds satisfied" if all_ok else "BOUND VIOLATION")
    return 0 if all_ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="willmore",
        description="Willmore energy minimization of genus-1 surfaces at fixed conformal class",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("analyze", "minimize", "sweep", "verify", "ift-demo"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None)
        p.add_argument("--grid", type=int, default=None)
        p.add_argument("--surface", type=str, default=None)
        p.add_argument("--R", type=float, default=None)
        p.add_argument("--r", type=float, default=None)
        p.add_argument("--amplitude", type=float, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--tau-re", dest="tau_re", type=float, default=None)
        p.add_argument("--tau-im", dest="tau_im", type=float, default=None)
        p.add_argument("--max-iters", dest="max_iters", type=int, default=None)
        p.add_argument("--tol-grad", dest="tol_grad", type=float, default=None)
        p.add_argument("--tol-tau", dest="tol_tau", type=float, default=None)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--filter", type=str, default=None)
        p.add_argument("--in", dest="in_path", type=str, default=None)
    return parser


COMMANDS = {
    "analyze": cmd_analyze,
    "minimize": cmd_minimize,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "ift-demo": cmd_ift_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {
        k: v for k, v in vars(args).items() if k not in ("command", "config")
    }
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
