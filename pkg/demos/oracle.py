"""Compare the production integrator with the independent reference integrator.

    python demos/oracle.py --instance ci2 --a 1 100 1e4
"""

import argparse

from plapshoot.integrator import propagate, reference_propagate
from plapshoot.model import ci1, ci2, make_problem
from plapshoot.startup import solve_startup


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instance", choices=["ci1", "ci2"], default="ci1")
    ap.add_argument("--a", type=float, nargs="+", default=[1.0, 10.0, 100.0, 1000.0])
    ap.add_argument("--tol", type=float, default=1e-10)
    ap.add_argument("--tol-ref", type=float, default=1e-12)
    args = ap.parse_args()

    problem = make_problem({"ci1": ci1, "ci2": ci2}[args.instance]())
    print(f"{'a':>10} {'zeros':>5} {'v(T) prod':>22} {'v(T) ref':>22} {'rel diff':>9}")
    for a in args.a:
        st = solve_startup(problem, a, args.tol)
        prod = propagate(problem, st, args.tol)
        ref = reference_propagate(problem, st, args.tol_ref)
        rel = max(abs(x - y) / max(abs(y), 1.0) for x, y in zip(prod.terminal, ref.terminal))
        print(f"{a:10.4g} {len(prod.zeros):5d} {prod.terminal[0]:22.15e} "
              f"{ref.terminal[0]:22.15e} {rel:9.2e}")


if __name__ == "__main__":
    main()
