"""Timing comparison of the compiled and numpy geometry kernel backends.

Run:  python benchmarks/bench_kernels.py [--sizes 64,128,256] [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from willmore.backend import get_backends
from willmore.geometry import Immersion, curvature, el_operator
from willmore.grid import GridSpec, partial, partial2
from willmore.surfaces import perturbed_torus


def time_call(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_assemble(impl, fu, fv, fuu, fuv, fvv, repeat):
    return time_call(lambda: impl.assemble_geometry(fu, fv, fuu, fuv, fvv), repeat)


def bench_q_action(impl, ginv, A0, H, repeat):
    return time_call(lambda: impl.q_action(ginv, A0, H), repeat)


def bench_project(impl, fu, fv, ginv, W, repeat):
    return time_call(lambda: impl.project_tangent(fu, fv, ginv, W), repeat)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="64,128,256")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    backends = get_backends()
    names = [n for n, _ in backends]
    print(f"available backends: {', '.join(names)}")
    header = f"{'kernel':<22}{'n':>6}" + "".join(f"{n:>14}" for n in names) + f"{'speedup':>10}"
    print(header)
    print("-" * len(header))

    for n in sizes:
        grid = GridSpec(n, n)
        f = perturbed_torus(grid, amplitude=0.05, seed=1)
        pts = f.points
        fu = np.ascontiguousarray(partial(pts, "u", grid))
        fv = np.ascontiguousarray(partial(pts, "v", grid))
        fuu = np.ascontiguousarray(partial2(pts, "u", grid))
        fvv = np.ascontiguousarray(partial2(pts, "v", grid))
        fuv = np.ascontiguousarray(partial(fu, "v", grid))

        rows = {}
        for name, impl in backends:
            rows.setdefault("assemble_geometry", []).append(
                bench_assemble(impl, fu, fv, fuu, fuv, fvv, args.repeat)
            )
        g, ginv, sq, gam, A, H, A0, K, *_ = backends[0][1].assemble_geometry(
            fu, fv, fuu, fuv, fvv
        )
        ginv = np.ascontiguousarray(ginv)
        A0 = np.ascontiguousarray(A0)
        H = np.ascontiguousarray(H)
        for name, impl in backends:
            rows.setdefault("q_action", []).append(bench_q_action(impl, ginv, A0, H, args.repeat))
            rows.setdefault("project_tangent", []).append(
                bench_project(impl, fu, fv, ginv, H, args.repeat)
            )

        for kernel, times in rows.items():
            sp = times[0] / times[-1] if len(times) > 1 else float("nan")
            cells = "".join(f"{t * 1e3:>12.2f}ms" for t in times)
            print(f"{kernel:<22}{n:>6}{cells}{sp:>9.2f}x")

    # end-to-end: curvature + EL operator through the active backend
    print()
    for n in sizes:
        grid = GridSpec(n, n)
        f = perturbed_torus(grid, amplitude=0.05, seed=1)
        t = time_call(lambda: el_operator(curvature(f)), args.repeat)
        print(f"el_operator end-to-end at {n}x{n}: {t * 1e3:.1f} ms (active backend)")


if __name__ == "__main__":
    main()
