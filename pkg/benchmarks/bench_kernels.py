"""Compare the compiled and pure-Python kernels on a bundled case.

Usage: python benchmarks/bench_kernels.py [--case toy2x2] [--repeat 3]

Times one transient march (all monitored nodes) and the batched VVI
quadrature with each backend, and checks that both give the same answer.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from pdn25d import kernels
from pdn25d.case import load_case
from pdn25d.floorplan import DecapLayout
from pdn25d.netlist import apply_decaps
from pdn25d.transient import transient_solve
from pdn25d.vvi import vvi_report


def best_of(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--case", default="toy2x2")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    case = load_case(args.case)
    prob = case.time_problem(n=1)
    net = apply_decaps(prob.netlist, DecapLayout.empty(case.floorplan), case.params)
    sources = [s for p in prob.profile_sets[0] for s in p.sources]
    backends = ["python"] + (["cython"] if kernels.HAVE_EXTENSION else [])
    print(f"case {case.name}: {net.n_nodes} nodes, {len(net.branches)} branches, "
          f"{int(round(prob.t_end / prob.dt))} steps")

    results = {}
    for b in backends:
        t_march, sol = best_of(lambda: transient_solve(net, sources, prob.dt, prob.t_end, prob.monitored,
                                                       loss_frequency=prob.loss_frequency, backend=b),
                               args.repeat)
        kernels.set_backend(b)
        t_vvi, rep = best_of(lambda: vvi_report(sol, prob.vvi_spec), args.repeat)
        results[b] = (sol, rep)
        print(f"{b:7s} march {t_march * 1e3:9.2f} ms   vvi {t_vvi * 1e3:8.3f} ms")
    if len(results) == 2:
        (sp, rp), (sc, rc) = results["python"], results["cython"]
        dv = float(np.abs(sp.voltages - sc.voltages).max())
        dq = float(np.abs(rp.per_node - rc.per_node).max())
        print(f"max |dv| {dv:.2e} V, max |dvvi| {dq:.2e} V*s")
    else:
        print("compiled extension not built; only the Python backend was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
