"""Personal-loss curves over the tether strength lambda, for both client
classes under both aggregation rules, with the closed-form optima marked.

    python scripts/tether_sweep.py --trials 200000 --out tether_sweep.csv
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from feo2.analytic import AnalyticParams, lambda_star_np, lambda_star_p
from feo2.simulate import lambda_sweep


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=float, default=100)
    ap.add_argument("--N-p", dest="N_p", type=float, default=95)
    ap.add_argument("--tau2", type=float, default=0.5)
    ap.add_argument("--beta2", type=float, default=0.25)
    ap.add_argument("--n-s", dest="n_s", type=int, default=1)
    ap.add_argument("--gamma2", type=float, default=1.0)
    ap.add_argument("--lambda-max", dest="lam_max", type=float, default=2.0)
    ap.add_argument("--step", type=float, default=0.05)
    ap.add_argument("--trials", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None)
    args = ap.parse_args(argv)

    p = AnalyticParams(
        N=args.N, N_p=args.N_p, tau2=args.tau2, beta2=args.beta2,
        gamma2=args.gamma2, n_s=args.n_s,
    )
    grid = [round(k * args.step, 10) for k in range(int(args.lam_max / args.step) + 1)]

    curves = {}
    for agg in ("feo2", "fedavg"):
        for private in (True, False):
            curves[agg, private] = lambda_sweep(
                p, private, grid, args.trials, args.seed, aggregator=agg
            )

    lines = ["lambda,aggregator,focal_private,loss"]
    for (agg, private), pts in curves.items():
        lines += [f"{lam!r},{agg},{int(private)},{loss!r}" for lam, loss in pts]
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
        print(f"wrote {sum(len(c) for c in curves.values())} rows to {args.out}")

    print(f"lambda*_p = {lambda_star_p(p):.4f}   lambda*_np = {lambda_star_np(p):.4f}")
    for (agg, private), pts in curves.items():
        lam, loss = min(pts, key=lambda t: t[1])
        who = "private " if private else "opted-out"
        print(f"{agg:6s} {who}: argmin lambda = {lam:.2f}  min loss = {loss:.6f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
