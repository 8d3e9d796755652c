"""Command-line front end: ``csa-lab <command> [flags]``.

Exit status is 0 on success, 1 when ``verify`` produces a failing verdict
and 2 for configuration errors (including unknown flags).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict

import numpy as np

from csa_lab.errors import ConfigurationError, ContractError, NumericalDomainError, QuadratureAccuracyError
from csa_lab.es_core import (
    NORM_LENGTH,
    SQUARED_LENGTH,
    AlgorithmParams,
    ObjectiveSpec,
    init_state,
    run_rng,
    step,
)
from csa_lab.montecarlo import FIGURE1_LEVELS, EnsembleConfig, compare, run_ensemble
from csa_lab.order_stats import OrderStatSpec, moment_table_rows, moments_quadrature
from csa_lab.theory import ScalingSpec, predict, relative_std_curve, relative_std_curve_fixed_c

SCHEMA_VERSION = 1
RULES = {"squared": SQUARED_LENGTH, "norm": NORM_LENGTH}

# Fig. 2 (right) curves: fixed c values, then c = 1/(1 + n^alpha)
FIGURE2_FIXED_C = (1.0, 0.5, 0.2)
FIGURE2_ALPHAS = (0.25, 1.0 / 3.0, 0.5, 1.0)


# ---------------------------------------------------------------- output


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(rows[0].keys())
    for row in rows:
        writer.writerow(_fmt(v) for v in row.values())
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def to_json(payload: dict) -> str:
    body = {"schema_version": SCHEMA_VERSION, **payload}
    return json.dumps(_json_safe(body), indent=2, allow_nan=False) + "\n"


def _emit(args, rows: list[dict], payload: dict | None = None) -> None:
    if args.format == "csv":
        text = rows_to_csv(rows)
    else:
        text = to_json(payload if payload is not None else {"rows": rows})
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------- parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(f"{self.prog}: {message}")


def _levels(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_output(p):
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _add_params(p, n=20, lam=8):
    p.add_argument("--n", type=int, default=n)
    p.add_argument("--lambda", dest="lam", type=int, default=lam)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--c", type=float, default=None, help="cumulation parameter, 0 < c <= 1 (default 1)")
    group.add_argument("--alpha", type=float, default=None, help="use c = 1/(1 + n^alpha)")
    p.add_argument("--d-sigma", type=float, default=1.0)
    p.add_argument("--rule", choices=tuple(RULES), default="squared")


def _add_ensemble(p, runs=1000, t_max=1000):
    p.add_argument("--mode", choices=("full", "shortcut"), default="shortcut")
    p.add_argument("--runs", type=int, default=runs)
    p.add_argument("--t-max", type=int, default=t_max)
    p.add_argument("--burn-in", type=int, default=None, help="default ceil(10/c)")
    p.add_argument("--seed", type=int, default=2012)
    p.add_argument("--quantiles", type=_levels, default=FIGURE1_LEVELS)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csa-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("predict", help="closed-form predictions for one parameter set")
    _add_params(p)
    _add_output(p)

    p = sub.add_parser("simulate", help="run an ensemble and emit ln(sigma_t/sigma_0) quantiles")
    _add_params(p)
    _add_ensemble(p)
    p.add_argument("--trace", default=None, help="also write the per-step trace of run 0 as CSV")
    _add_output(p)

    p = sub.add_parser("verify", help="compare an ensemble against the closed forms")
    _add_params(p)
    _add_ensemble(p)
    p.add_argument("--z", type=float, default=4.0, help="z-score threshold")
    _add_output(p)

    p = sub.add_parser("figure1", help="quantile series for c = 1 and c = 1/sqrt(n)")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--lambda", dest="lam", type=int, default=8)
    p.add_argument("--d-sigma", type=float, default=1.0)
    p.add_argument("--rule", choices=tuple(RULES), default="squared")
    _add_ensemble(p, runs=5001)
    _add_output(p)

    p = sub.add_parser("figure2", help="relative standard deviation curves")
    p.add_argument("--lambda", dest="lam", type=int, default=8)
    p.add_argument("--d-sigma", type=float, default=1.0)
    p.add_argument("--n-max", type=int, default=100000)
    _add_output(p)

    p = sub.add_parser("moments", help="order-statistic moment table")
    p.add_argument("--lambda", dest="lam", type=int, nargs="+", default=list(range(1, 21)))
    p.add_argument("--tol", type=float, default=1e-10)
    _add_output(p)
    return parser


def _params(args) -> AlgorithmParams:
    if args.alpha is not None:
        if args.alpha < 0:
            raise ConfigurationError(f"alpha must be non-negative, got {args.alpha}")
        c = 1.0 / (1.0 + args.n**args.alpha)
    else:
        c = 1.0 if args.c is None else args.c
    return AlgorithmParams(n=args.n, lam=args.lam, c=c, d_sigma=args.d_sigma, update_rule=RULES[args.rule])


def _ensemble_config(args, params) -> EnsembleConfig:
    return EnsembleConfig(
        params=params,
        runs=args.runs,
        t_max=args.t_max,
        objective=ObjectiveSpec(),
        mode=args.mode,
        burn_in=args.burn_in,
        master_seed=args.seed,
        quantile_levels=args.quantiles,
    )


def _estimates(result) -> dict:
    def pack(est):
        return None if est is None else {"value": est.value, "stderr": est.stderr}

    return {
        "rate": pack(result.empirical_rate),
        "increment_mean": pack(result.inc_mean),
        "increment_variance": pack(result.inc_var),
        "x_rate": pack(result.x_rate),
        "excluded_runs": result.n_excluded,
        "warnings": list(result.warnings),
    }


def _quantile_payload(result) -> dict:
    return {
        "t": result.t_grid,
        "levels": list(result.levels),
        "quantiles": result.quantile_series,
    }


# ---------------------------------------------------------------- commands


def cmd_predict(args) -> int:
    pred = predict(_params(args))
    row = pred.as_row()
    _emit(args, [row], {"prediction": row})
    return 0


def _write_trace(path: str, config: EnsembleConfig) -> None:
    rng = run_rng(config.master_seed, 0)
    state = init_state(config.params, rng)
    rows = []
    for _ in range(config.t_max):
        state, inc, _ = step(state, config.params, rng, config.objective, config.mode)
        rows.append(
            {
                "t": state.t,
                "log_sigma": state.log_sigma,
                "log_increment": inc,
                "p_norm_sq": float(np.sum(state.p * state.p)),
                "x1": float(state.x[0]),
            }
        )
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))


def cmd_simulate(args) -> int:
    config = _ensemble_config(args, _params(args))
    result = run_ensemble(config)
    if args.trace:
        _write_trace(args.trace, config)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    payload = {
        "params": asdict(config.params),
        "runs": config.runs,
        "t_max": config.t_max,
        "seed": config.master_seed,
        **_quantile_payload(result),
        "estimates": _estimates(result),
    }
    _emit(args, result.quantile_rows(), payload)
    return 0


def cmd_verify(args) -> int:
    params = _params(args)
    theory = predict(params)
    config = _ensemble_config(args, params)
    result = run_ensemble(config)
    verdicts = compare(theory, result, args.z)
    rows = [v.as_dict() for v in verdicts]
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _emit(
        args,
        rows,
        {"params": asdict(params), "runs": config.runs, "t_max": config.t_max, "seed": config.master_seed, "verdicts": rows},
    )
    failed = [v.quantity for v in verdicts if not v.passed]
    if failed or result.n_excluded:
        print(f"verification failed: {', '.join(failed) or 'excluded runs'}", file=sys.stderr)
        return 1
    return 0


def cmd_figure1(args) -> int:
    rows, panels = [], []
    for c in (1.0, 1.0 / math.sqrt(args.n)):
        params = AlgorithmParams(args.n, args.lam, c, args.d_sigma, RULES[args.rule])
        args.alpha = None
        result = run_ensemble(_ensemble_config(args, params))
        for r in result.quantile_rows():
            rows.append({"c": c, **r})
        panels.append({"c": c, **_quantile_payload(result), "estimates": _estimates(result)})
    _emit(args, rows, {"n": args.n, "lambda": args.lam, "runs": args.runs, "seed": args.seed, "panels": panels})
    return 0


def figure2_rows(lam: int, d_sigma: float, n_max: int) -> list[dict]:
    n_grid = tuple(int(v) for v in np.unique(np.round(np.geomspace(2, n_max, 60))))
    rows = []
    curves = [(f"c={c:g}", relative_std_curve_fixed_c(c, n_grid, lam, d_sigma)) for c in FIGURE2_FIXED_C]
    curves += [(f"alpha={a:.6g}", relative_std_curve(ScalingSpec(a, n_grid), lam, d_sigma)) for a in FIGURE2_ALPHAS]
    for name, curve in curves:
        for r in curve:
            rows.append({"curve": name, "n": r.n, "c": r.c, "rate": r.rate, "std": r.std, "rel_std": r.rel_std})
    return rows


def cmd_figure2(args) -> int:
    if args.n_max < 2:
        raise ConfigurationError("--n-max must be at least 2")
    rows = figure2_rows(args.lam, args.d_sigma, args.n_max)
    _emit(args, rows, {"lambda": args.lam, "d_sigma": args.d_sigma, "rows": rows})
    return 0


def cmd_moments(args) -> int:
    tables = [moments_quadrature(OrderStatSpec(lam, 1), 4, args.tol) for lam in args.lam]
    rows = moment_table_rows(tables)
    _emit(args, rows, {"rows": rows})
    return 0


COMMANDS = {
    "predict": cmd_predict,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "figure1": cmd_figure1,
    "figure2": cmd_figure2,
    "moments": cmd_moments,
}


def run_cli(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except (ConfigurationError, ContractError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalDomainError, QuadratureAccuracyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())
