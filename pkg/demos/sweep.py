"""Large-slope sweep: first maximum, first zero and the time-map limit.

    python demos/sweep.py --a1 128 --doublings 6
"""

import argparse

import numpy as np

from plapshoot.asymptotics import limit_gap_check, sweep, trend_check
from plapshoot.model import ci1, ci2, make_problem


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instance", choices=["ci1", "ci2"], default="ci1")
    ap.add_argument("--a1", type=float, default=128.0)
    ap.add_argument("--doublings", type=int, default=6)
    args = ap.parse_args()

    params = {"ci1": ci1, "ci2": ci2}[args.instance]()
    problem = make_problem(params)
    table = sweep(problem, args.a1 * 2.0 ** np.arange(args.doublings + 1))
    print(f"{'a':>8} {'M_a':>12} {'v(M_a)':>12} {'z_a':>12} {'|v(z_a)|':>12} {'lhs/rhs':>9}")
    for r in table.rows:
        print(f"{r.a:8.4g} {r.M_a:12.6e} {r.v_at_M:12.6e} {r.z_a:12.6e} "
              f"{r.abs_slope_at_z:12.6e} {r.timemap_lhs / r.timemap_rhs:9.6f}")
    trends = trend_check(table)
    for name in ("M_a", "v_at_M", "z_a", "abs_slope_at_z", "max_v"):
        print(f"trend {name}: {'pass' if trends[name]['passed'] else 'FAIL'}")
    gaps = limit_gap_check(table, params.p, params.l + 1.0)
    print(f"normalized integral -> {gaps['limit']:.12f}; gaps "
          + " ".join(f"{g:.1e}" for g in gaps["gaps"]))


if __name__ == "__main__":
    main()
