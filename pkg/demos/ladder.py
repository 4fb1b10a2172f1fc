"""Solve the first few sign-changing solutions of an instance and save u(r).

    python demos/ladder.py --instance ci1 --extra 3 --out out/demo_ladder
"""

import argparse

from plapshoot.model import ci1, ci2, make_problem
from plapshoot.outputs import write_outputs
from plapshoot.rdomain import to_r_domain
from plapshoot.shooting import ShootSettings, solve_ladder


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instance", choices=["ci1", "ci2"], default="ci2")
    ap.add_argument("--extra", type=int, default=3, help="solve n0, ..., n0 + extra")
    ap.add_argument("--tol", type=float, default=1e-10)
    ap.add_argument("--out", default="out/demo_ladder")
    args = ap.parse_args()

    problem = make_problem({"ci1": ci1, "ci2": ci2}[args.instance]())
    ladder = solve_ladder(problem, settings=ShootSettings(tol=args.tol), extra=args.extra)
    for note in ladder.notes:
        print("note:", note)
    profiles = {}
    for n, e in sorted(ladder.entries.items()):
        prof = to_r_domain(e.trajectory, e.a_n, n=n)
        profiles[n] = prof
        zeros = ", ".join(f"{r:.6g}" for r in prof.zeros_r)
        print(f"n = {n}: a_n = {e.a_n:.12g}, certified {e.certified}, "
              f"u(R) = {prof.u_R:+.2e}, zeros in r: [{zeros}]")
    paths = write_outputs(args.out, ladder=ladder, profiles=profiles)
    print("wrote", ", ".join(str(p) for p in paths.values()))


if __name__ == "__main__":
    main()
