"""Closed-form and synthetic genus-1 test surfaces."""

from __future__ import annotations

import numpy as np

from .geometry import Immersion, curvature, projections
from .grid import GridSpec

__all__ = [
    "torus_of_revolution",
    "clifford_torus",
    "random_smooth_scalar",
    "random_smooth_normal_field",
    "perturbed_torus",
    "revolution_willmore_energy",
    "revolution_modulus",
    "revolution_gauss_curvature",
]


def torus_of_revolution(grid: GridSpec, R: float = np.sqrt(2.0), r: float = 1.0) -> Immersion:
    """Torus of revolution; u runs around the minor circle, v the major one."""
    if not (R > r > 0):
        raise ValueError("need R > r > 0")
    u, v = grid.mesh()
    rad = R + r * np.cos(2 * np.pi * u)
    pts = np.stack(
        [rad * np.cos(2 * np.pi * v), rad * np.sin(2 * np.pi * v), r * np.sin(2 * np.pi * u)],
        axis=-1,
    )
    return Immersion(pts, grid)


def clifford_torus(grid: GridSpec) -> Immersion:
    """Product of two circles of radius 1/sqrt(2) in R^4 (a Willmore surface)."""
    u, v = grid.mesh()
    s = 1.0 / np.sqrt(2.0)
    pts = np.stack(
        [
            s * np.cos(2 * np.pi * u),
            s * np.sin(2 * np.pi * u),
            s * np.cos(2 * np.pi * v),
            s * np.sin(2 * np.pi * v),
        ],
        axis=-1,
    )
    return Immersion(pts, grid)


def random_smooth_scalar(
    grid: GridSpec, seed: int, k_max: int = 3, rms: float = 1.0
) -> np.ndarray:
    """Band-limited random field (modes |k| <= k_max), normalized to unit RMS."""
    rng = np.random.default_rng(seed)
    u, v = grid.mesh()
    out = np.zeros(grid.shape)
    for ku in range(-k_max, k_max + 1):
        for kv in range(-k_max, k_max + 1):
            if ku == 0 and kv == 0:
                continue
            w = 1.0 / (1.0 + ku * ku + kv * kv)
            phase = 2 * np.pi * (ku * u + kv * v)
            a, b = rng.standard_normal(2)
            out += w * (a * np.cos(phase) + b * np.sin(phase))
    out *= rms / np.sqrt(np.mean(out**2))
    return out


def random_smooth_normal_field(
    f: Immersion, seed: int, amplitude: float = 1.0, k_max: int = 3
) -> np.ndarray:
    """Smooth random ambient field projected to the normal bundle of f.

    For n = 3 this is a scalar profile times the unit normal; for n = 4 a
    smooth R^4 field projected normally.  Scaled so the max pointwise norm
    equals ``amplitude``.
    """
    cache = curvature(f)
    n = f.ambient_dim
    comps = [random_smooth_scalar(f.grid, seed + 13 * a, k_max) for a in range(n)]
    W = np.stack(comps, axis=-1)
    _, nor = projections(cache, W)
    mx = np.sqrt(np.einsum("xya,xya->xy", nor, nor)).max()
    if mx == 0.0:
        raise ValueError("degenerate random normal field")
    return nor * (amplitude / mx)


def perturbed_torus(
    grid: GridSpec,
    R: float = np.sqrt(2.0),
    r: float = 1.0,
    amplitude: float = 0.05,
    seed: int = 0,
    k_max: int = 3,
) -> Immersion:
    """Torus of revolution plus a seeded smooth normal perturbation."""
    base = torus_of_revolution(grid, R, r)
    V = random_smooth_normal_field(base, seed, amplitude, k_max)
    return Immersion(base.points + V, grid)


def revolution_willmore_energy(R: float, r: float) -> float:
    """Closed form W = pi^2 R^2 / (r sqrt(R^2 - r^2)) for the revolution torus."""
    return np.pi**2 * R**2 / (r * np.sqrt(R**2 - r**2))


def revolution_modulus(R: float, r: float) -> complex:
    """Modulus of the revolution torus, u-loop as first homology generator.

    The conformal width of the u-cycle is L = r / sqrt(R^2 - r^2), so the
    lattice is [0, L] x [0, 1] and tau = i / L.
    """
    return 1j * np.sqrt(R**2 - r**2) / r


def revolution_gauss_curvature(grid: GridSpec, R: float, r: float) -> np.ndarray:
    """Classical K(u) = cos(2 pi u) / (r (R + r cos(2 pi u)))."""
    u, _ = grid.mesh()
    c = np.cos(2 * np.pi * u)
    return c / (r * (R + r * c))
