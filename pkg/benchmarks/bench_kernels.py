"""Compare the compiled and pure-Python kernel backends.

Usage: ``python3 benchmarks/bench_kernels.py [--n 16] [--repeat 5]``
"""
import argparse
import time

import numpy as np

from ericksen import kernels
from ericksen.fem import assemble_stiffness, edge_weights
from ericksen.mesh import boundary_nodes, build_cube_mesh
from ericksen.sparse import apply_dirichlet, cg_solve


def timed(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=16, help="cells per side of the cube mesh")
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    mesh = build_cube_mesh(args.n, args.n, args.n)
    K = assemble_stiffness(mesh)
    ew = edge_weights(K)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(mesh.n_vertices)
    v = rng.standard_normal((mesh.n_vertices, 3))
    nodes = boundary_nodes(mesh, "all")
    A, b = apply_dirichlet(K, np.ones(mesh.n_vertices), nodes, np.zeros(nodes.size))

    cases = {
        "csr_matvec": lambda be: kernels.csr_matvec(K.indptr, K.indices, K.data, x, backend=be),
        "pair_sqdist": lambda be: kernels.pair_sqdist(ew.i, ew.j, v, backend=be),
        "scatter_pairs": lambda be: kernels.scatter_pairs(ew.i, ew.j, ew.k, mesh.n_vertices,
                                                          backend=be),
        "cg_solve": lambda be: cg_solve(A, b, tol=1e-10, backend=be),
    }
    backends = [name for name in ("python", "cython") if name in kernels.BACKENDS]
    print(f"mesh {args.n}^3: {mesh.n_vertices} vertices, {K.nnz} stiffness nonzeros")
    print(f"{'kernel':<15}" + "".join(f"{name:>12}" for name in backends) + "     speedup")
    for label, fn in cases.items():
        times = [timed(lambda: fn(name), args.repeat) for name in backends]
        line = f"{label:<15}" + "".join(f"{t * 1e3:10.3f}ms" for t in times)
        if len(times) == 2:
            line += f"  {times[0] / times[1]:9.2f}x"
        print(line)


if __name__ == "__main__":
    main()
