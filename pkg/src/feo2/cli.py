"""Command-line interface.

Verbs:
  run          execute an experiment config, writing rounds.csv / summary.json /
               manifest.json into --out
  validate     parse a config and print its resolved form plus content hash
  solve-z      invert the privacy accountant for a target (epsilon, delta)
  analytic     closed-form quantities and Monte Carlo sweeps

Exit codes: 0 success, 1 run failure (partial CSV is flushed with a trailing
FAILED marker row), 2 configuration / usage failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from .accounting import solve_z
from .analytic import (
    AnalyticParams,
    UnboundedLambda,
    gap_dpfedavg,
    gap_fedavg,
    lambda_star_general,
    lambda_star_np,
    lambda_star_p,
    optimal_ratio,
    server_variance_at,
    server_variance_dpfedavg,
    server_variance_fedavg,
    server_variance_opt,
)
from .config import config_to_dict, manifest_hash, parse_config
from .simulate import RoundReport, lambda_sweep, monte_carlo_server_variance, run_experiment

_CONFIG_ERRORS = (OSError, yaml.YAMLError, ValueError, TypeError, KeyError)


def _jsonable(obj):
    """Strict-JSON-safe copy: non-finite floats become 'inf'/'-inf'/'nan' strings."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(_jsonable(payload), indent=2, allow_nan=False) + "\n"
    sys.stdout.write(text)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")


def _analytic_params(args) -> AnalyticParams:
    d = getattr(args, "dim", 1)
    if args.sigma_c2 is not None:
        if args.tau2 is not None or args.beta2 is not None:
            raise ValueError("give either --sigma-c2 or the --tau2/--beta2 split, not both")
        return AnalyticParams.from_sigma_c2(
            N=args.N, N_p=args.N_p, sigma_c2=args.sigma_c2, gamma2=args.gamma2, d=d
        )
    if args.tau2 is None or args.beta2 is None:
        raise ValueError("need --sigma-c2, or both --tau2 and --beta2")
    return AnalyticParams(
        N=args.N, N_p=args.N_p, tau2=args.tau2, beta2=args.beta2,
        gamma2=args.gamma2, n_s=args.n_s, d=d,
    )


def _add_param_flags(sub, with_dim: bool = False) -> None:
    sub.add_argument("--N", type=float, required=True, help="total number of clients")
    sub.add_argument("--N-p", type=float, required=True, help="number of private clients")
    sub.add_argument("--gamma2", type=float, required=True, help="DP noise variance at the private mean")
    sub.add_argument("--sigma-c2", type=float, default=None, help="per-client update variance (shortcut)")
    sub.add_argument("--tau2", type=float, default=None, help="client truth spread around the global truth")
    sub.add_argument("--beta2", type=float, default=None, help="per-sample observation noise variance")
    sub.add_argument("--n-s", type=int, default=1, help="samples per client (alpha2 = beta2/n_s)")
    if with_dim:
        sub.add_argument("--dim", type=int, default=1, help="model dimension")


def _maybe_inf(fn, *a):
    try:
        return fn(*a)
    except UnboundedLambda:
        return math.inf


# --- verb handlers ----------------------------------------------------------


def _cmd_run(args) -> int:
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, master_seed=args.seed)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.workers < 1:
        print("config error: --workers must be >= 1", file=sys.stderr)
        return 2

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config_path": str(Path(args.config).resolve()),
        "config": config_to_dict(cfg),
        "config_sha256": manifest_hash(cfg),
        "out_dir": str(out_dir.resolve()),
        "workers": args.workers,
        "started_at": datetime.now(timezone.utc).isoformat(),
    }

    rounds_path = out_dir / "rounds.csv"
    result = None
    failure = None
    with open(rounds_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(RoundReport.CSV_HEADER + "\n")

        def flush_row(report: RoundReport) -> None:
            fh.write(report.csv_row() + "\n")
            fh.flush()

        try:
            result = run_experiment(cfg, workers=args.workers, on_round=flush_row)
        except Exception as exc:  # noqa: BLE001 - anything mid-run is a run failure
            failure = exc
            msg = " ".join(str(exc).split()).replace(",", ";") or type(exc).__name__
            fh.write(f"FAILED,{msg}\n")

    manifest["finished_at"] = datetime.now(timezone.utc).isoformat()
    manifest["status"] = "failed" if failure is not None else "ok"
    (out_dir / "manifest.json").write_text(
        json.dumps(_jsonable(manifest), indent=2, allow_nan=False) + "\n", encoding="utf-8"
    )
    if failure is not None:
        print(f"run failed: {failure}", file=sys.stderr)
        return 1

    final = dataclasses.asdict(result.reports[-1]) if result.reports else None
    summary = {
        "rounds_completed": len(result.reports),
        "final_round": final,
        "privacy": result.ledger.to_dict(),
        "config_sha256": manifest["config_sha256"],
    }
    (out_dir / "summary.json").write_text(
        json.dumps(_jsonable(summary), indent=2, allow_nan=False) + "\n", encoding="utf-8"
    )
    return 0


def _cmd_validate(args) -> int:
    try:
        cfg = parse_config(args.config)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    _emit({"config": config_to_dict(cfg), "config_sha256": manifest_hash(cfg)}, args.out)
    return 0


def _cmd_solve_z(args) -> int:
    try:
        z = solve_z(args.epsilon, args.delta, args.q, args.rounds)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    _emit(
        {"z": z, "epsilon": args.epsilon, "delta": args.delta, "q": args.q, "rounds": args.rounds},
        args.out,
    )
    return 0


def _cmd_analytic(args) -> int:
    try:
        p = _analytic_params(args)
        payload = args.analytic_fn(p, args)
    except (UnboundedLambda, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    _emit(payload, args.out)
    return 0


def _an_ratio(p: AnalyticParams, args) -> dict:
    return {"r_star": optimal_ratio(p)}


def _an_variance(p: AnalyticParams, args) -> dict:
    payload = {
        "opt": server_variance_opt(p),
        "fedavg": server_variance_fedavg(p),
        "dpfedavg": server_variance_dpfedavg(p),
    }
    if args.r is not None:
        payload["at_r"] = {"r": args.r, "variance": server_variance_at(p, args.r)}
    return payload


def _an_gaps(p: AnalyticParams, args) -> dict:
    return {"gap_fedavg": gap_fedavg(p), "gap_dpfedavg": gap_dpfedavg(p)}


def _an_lambdas(p: AnalyticParams, args) -> dict:
    payload = {
        "lambda_opted_out": _maybe_inf(lambda_star_np, p),
        "lambda_private": _maybe_inf(lambda_star_p, p),
    }
    if args.r is not None:
        payload["at_r"] = {
            "r": args.r,
            "lambda_private": _maybe_inf(lambda_star_general, p, True, args.r),
            "lambda_opted_out": _maybe_inf(lambda_star_general, p, False, args.r),
        }
    return payload


def _an_r_sweep(p: AnalyticParams, args) -> dict:
    grid = list(np.round(np.arange(0.0, 1.0 + 1e-12, args.step), 10))
    r_star = optimal_ratio(p)
    if all(abs(r_star - g) > 1e-12 for g in grid):
        grid = sorted(grid + [r_star])
    rows = [
        {
            "r": r,
            "mc": monte_carlo_server_variance(p, r, args.trials, args.seed),
            "exact": server_variance_at(p, r),
        }
        for r in grid
    ]
    best = min(rows, key=lambda row: row["mc"])
    return {"r_star": r_star, "sigma2_opt": server_variance_opt(p), "mc_argmin": best["r"], "rows": rows}


def _an_lambda_sweep(p: AnalyticParams, args) -> dict:
    grid = list(np.round(np.arange(args.lambda_min, args.lambda_max + 1e-12, args.step), 10))
    focal_private = args.focal == "private"
    pairs = lambda_sweep(p, focal_private, grid, args.trials, args.seed, aggregator=args.aggregator)
    rows = [{"lambda": lam, "loss": loss} for lam, loss in pairs]
    best = min(rows, key=lambda row: row["loss"])
    if focal_private:
        scenario = p
    else:
        scenario = AnalyticParams(
            N=p.N, N_p=p.N_p - 1, tau2=p.tau2, beta2=p.beta2, gamma2=p.gamma2, n_s=p.n_s, d=p.d
        )
    r = 1.0 if args.aggregator == "fedavg" else optimal_ratio(scenario)
    return {
        "focal": args.focal,
        "aggregator": args.aggregator,
        "r": r,
        "lambda_star": _maybe_inf(lambda_star_general, scenario, focal_private, r),
        "mc_argmin": best["lambda"],
        "rows": rows,
    }


def _an_rho_sweep(p: AnalyticParams, args) -> dict:
    rows = []
    for rho in np.round(np.arange(0.0, 1.0 + 1e-12, args.step), 10):
        n_np = rho * p.N
        q = AnalyticParams(
            N=p.N, N_p=p.N - n_np, tau2=p.tau2, beta2=p.beta2, gamma2=p.gamma2, n_s=p.n_s, d=p.d
        )
        rows.append(
            {
                "rho_np": float(rho),
                "opt": server_variance_opt(q),
                "fedavg": server_variance_fedavg(q),
                "dpfedavg": server_variance_dpfedavg(q),
            }
        )
    return {"rows": rows}


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feo2",
        description="Federated learning simulator with opt-out client-level differential privacy.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="execute an experiment config")
    run.add_argument("--config", required=True, help="YAML/JSON experiment config")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, default=None, help="override master_seed")
    run.add_argument("--workers", type=int, default=1, help="client-update thread count")
    run.set_defaults(fn=_cmd_run)

    val = sub.add_parser("validate", help="check a config and print its resolved form")
    val.add_argument("--config", required=True)
    val.add_argument("--out", default=None, help="also write the JSON here")
    val.set_defaults(fn=_cmd_validate)

    sz = sub.add_parser("solve-z", help="noise multiplier for a target privacy budget")
    sz.add_argument("--epsilon", type=float, required=True)
    sz.add_argument("--delta", type=float, required=True)
    sz.add_argument("--q", type=float, required=True, help="per-round sampling fraction")
    sz.add_argument("--rounds", type=int, required=True)
    sz.add_argument("--out", default=None)
    sz.set_defaults(fn=_cmd_solve_z)

    an = sub.add_parser("analytic", help="closed forms and Monte Carlo checks")
    an_sub = an.add_subparsers(dest="analytic_verb", required=True)

    ratio = an_sub.add_parser("ratio", help="variance-optimal private-group weight r*")
    _add_param_flags(ratio)

    var = an_sub.add_parser("variance", help="server estimator variance per aggregation rule")
    _add_param_flags(var)
    var.add_argument("--r", type=float, default=None, help="also evaluate at this ratio")

    gaps = an_sub.add_parser("gaps", help="variance gaps of FedAvg / DP-FedAvg to the optimum")
    _add_param_flags(gaps)

    lams = an_sub.add_parser("lambdas", help="optimal personalization tether per client class")
    _add_param_flags(lams)
    lams.add_argument("--r", type=float, default=None, help="also evaluate the general form at r")

    rs = an_sub.add_parser("r-sweep", help="MC server variance over an r grid vs the closed form")
    _add_param_flags(rs, with_dim=True)
    rs.add_argument("--step", type=float, default=0.05)
    rs.add_argument("--trials", type=int, default=200_000)
    rs.add_argument("--seed", type=int, default=0)

    ls = an_sub.add_parser("lambda-sweep", help="MC personalization loss over a lambda grid")
    _add_param_flags(ls, with_dim=True)
    ls.add_argument("--focal", choices=("private", "opted-out"), default="private")
    ls.add_argument("--aggregator", choices=("feo2", "fedavg"), default="feo2")
    ls.add_argument("--lambda-min", type=float, default=0.0)
    ls.add_argument("--lambda-max", type=float, default=2.0)
    ls.add_argument("--step", type=float, default=0.05)
    ls.add_argument("--trials", type=int, default=100_000)
    ls.add_argument("--seed", type=int, default=0)

    rho = an_sub.add_parser("rho-sweep", help="variance of each rule as the opt-out share varies")
    _add_param_flags(rho)
    rho.add_argument("--step", type=float, default=0.01)

    for name, fn in (
        ("ratio", _an_ratio),
        ("variance", _an_variance),
        ("gaps", _an_gaps),
        ("lambdas", _an_lambdas),
        ("r-sweep", _an_r_sweep),
        ("lambda-sweep", _an_lambda_sweep),
        ("rho-sweep", _an_rho_sweep),
    ):
        an_sub.choices[name].add_argument("--out", default=None)
        an_sub.choices[name].set_defaults(fn=_cmd_analytic, analytic_fn=fn)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
