"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--nx 120] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from dmpfem import _pykernels, conditions, kernels
from dmpfem import mesh as M
from dmpfem.quadrature import simplex_rule


def cases(nx):
    mesh = M.generate_acute8_split(nx, nx)
    x = mesh.element_coordinates()
    q, vol, _ = _pykernels.simplex_geometry(x)
    rule = simplex_rule(2, 4)
    n, nq = mesh.n_elements, len(rule.weights)
    rng = np.random.default_rng(0)
    dk = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
    blocks = (q, vol, dk, rule.points, rule.weights, rng.normal(size=(n, nq, 2)),
              rng.uniform(size=(n, nq)), rng.normal(size=(n, nq)))
    ptr, nodes = conditions._ring_patches(mesh, 1)
    patch = (ptr, nodes, mesh.vertices, rng.normal(size=mesh.n_vertices))
    return mesh, {"simplex_geometry": (x,), "local_blocks": blocks,
                  "patch_normal_equations": patch}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nx", type=int, default=120)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if "cython" not in kernels.available_backends():
        raise SystemExit("compiled kernels are not built")
    from dmpfem import _ckernels

    mesh, work = cases(args.nx)
    print(f"acute8 {args.nx}x{args.nx}: {mesh.n_elements} elements, {mesh.n_vertices} vertices")
    print(f"{'kernel':<24}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}")
    for name, call_args in work.items():
        t = {}
        for label, mod in (("python", _pykernels), ("cython", _ckernels)):
            fn = getattr(mod, name)
            t[label] = min(timeit.repeat(lambda: fn(*call_args), number=1, repeat=args.repeat))
        print(f"{name:<24}{1e3 * t['python']:>14.2f}{1e3 * t['cython']:>14.2f}"
              f"{t['python'] / t['cython']:>10.2f}")


if __name__ == "__main__":
    main()
