"""Command-line front end: ``drmean <subcommand> ...``.

Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or
configuration error.
"""
import argparse
import contextlib
import sys
import warnings

import numpy as np

from . import __version__
from .diagnostics import FITTED_VALUE, LOGIT_PROPENSITY, residual_diagnostic
from .errors import ConfigError, DrMeanError, ExpressionSyntaxError, MalformedCsv
from .estimators import ESTIMATOR_NAMES, EstimatorConfig, run_estimator
from .expressions import eval_expression, max_variable, parse_expression, unparse
from .io import fmt, read_dataset_csv, write_dataset_csv, write_table
from .montecarlo import GRID_CELLS, RunConfig, metrics_table, run_simulation
from .numeric import LOESS_DEGREE, LOESS_GRID_POINTS, LOESS_SPAN, fit_logistic
from .propensity import BasisSpec, make_propensity_scores
from .scenarios import generate_sample, load_scenario, reversed_roles, validate_scenario, with_alternative_x4

BASES = {"spline": "spline_logit", "quintile": "quintile_indicators", "squared": "squared_lp"}
AXES = {"eta": LOGIT_PROPENSITY, "fitted": FITTED_VALUE}

METRIC_COLUMNS = ["cell", "estimator", "n_ok", "n_failed", "bias", "pct_bias", "rmse", "mae", "var", "mse"]
REPLICATE_COLUMNS = ["rep", "cell", "estimator", "estimate"]
ESTIMATE_COLUMNS = ["estimator", "estimate", "se", "n_respondents", "max_weight", "warnings"]
DIAGNOSE_COLUMNS = ["x", "residual", "group", "display", "curve"]


class UsageError(Exception):
    pass


def _csv_list(text):
    return [s.strip() for s in text.split(",") if s.strip()]


def _estimator_configs(args, default):
    names = _csv_list(args.estimators) if args.estimators else list(default)
    bad = [n for n in names if n not in ESTIMATOR_NAMES]
    if bad:
        raise UsageError(f"unknown estimator {bad[0]!r}; valid names: {', '.join(ESTIMATOR_NAMES)}")
    basis = BasisSpec(BASES[args.basis])
    try:
        return [
            EstimatorConfig.from_name(n, basis=basis, epsilon=args.epsilon, delta=args.delta, ramp_width=args.ramp_width)
            for n in names
        ]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


@contextlib.contextmanager
def _open_out(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _load_scenario(args):
    spec = load_scenario(args.scenario)
    for v in args.variant or []:
        spec = with_alternative_x4(spec) if v == "alt_x4" else reversed_roles(spec)
    return spec


def cmd_simulate(args):
    spec = _load_scenario(args)
    ests = _estimator_configs(args, ["naive_mean", "mu_ols", "mu_bc_ols", "mu_pi_cov"])
    grid = _csv_list(args.grid) if args.grid else ["both_wrong"]
    bad = [g for g in grid if g not in GRID_CELLS]
    if bad:
        raise UsageError(f"unknown grid cell {bad[0]!r}; valid cells: {', '.join(GRID_CELLS)}")
    cfg = RunConfig(spec, args.n, args.reps, ests, args.seed, grid, args.threads, args.epsilon)
    result = run_simulation(cfg)
    rows = [
        {
            "cell": m.cell, "estimator": m.estimator, "n_ok": m.n_ok, "n_failed": m.n_failed,
            "bias": m.bias, "pct_bias": m.pct_bias, "rmse": m.rmse, "mae": m.mae, "var": m.var, "mse": m.mse,
        }
        for m in metrics_table(result, args.mae)
    ]
    with _open_out(args.out) as fh:
        write_table(fh, METRIC_COLUMNS, rows, args.format)
    if args.replicates:
        reps = [
            {"rep": r, "cell": c, "estimator": e, "estimate": result.table[r, ci, ei]}
            for r in range(cfg.reps)
            for ci, c in enumerate(result.cells)
            for ei, e in enumerate(result.estimators)
        ]
        with _open_out(args.replicates) as fh:
            write_table(fh, REPLICATE_COLUMNS, reps, args.format)
    if args.dump_sample:
        s = generate_sample(spec, args.n, args.seed, 0)
        with open(args.dump_sample, "w", newline="") as fh:
            write_dataset_csv(fh, s.x, s.t, s.y_full)
    if result.failures:
        print(f"# {len(result.failures)} replicate failures excluded from metrics", file=sys.stderr)
        for f in result.failures[:20]:
            print(f"#   rep {f.rep} {f.cell} {f.estimator}: {f.message}", file=sys.stderr)
    return 0


def _read_data(path):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        d = read_dataset_csv(path)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return d


def cmd_estimate(args):
    ests = _estimator_configs(args, ESTIMATOR_NAMES)
    d = _read_data(args.data)
    ps = None
    if any(e.needs_propensity for e in ests):
        ps = make_propensity_scores(fit_logistic(d.X, d.t), args.epsilon)
    rows = []
    for e in ests:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            res = run_estimator(e, d, ps)
        notes = res.notes + [str(w.message) for w in caught if str(w.message) not in res.notes]
        rows.append({
            "estimator": res.estimator, "estimate": res.mu_hat, "se": res.se,
            "n_respondents": res.n_respondents, "max_weight": res.max_weight, "warnings": "; ".join(notes),
        })
    with _open_out(args.out) as fh:
        write_table(fh, ESTIMATE_COLUMNS, rows, args.format)
    return 0


def cmd_diagnose(args):
    y_full = None
    if args.data:
        d = _read_data(args.data)
        pi_X = d.X
    elif args.scenario:
        spec = _load_scenario(args)
        s = generate_sample(spec, args.n, args.seed)
        d, y_full = s.dataset, s.y_full
        pi_X = s.design(spec.pi_model_correct)
    else:
        raise UsageError("diagnose needs --data or --scenario")
    ps = make_propensity_scores(fit_logistic(pi_X, d.t), args.epsilon) if args.axis == "eta" else None
    diag = residual_diagnostic(
        d, ps, args.fit_group, AXES[args.axis], y_full, args.span, args.degree, args.grid_points,
        args.display_fraction, args.seed,
    )
    rows = [
        {"x": x, "residual": r, "group": g, "display": dsp, "curve": 0}
        for x, r, g, dsp in zip(diag.x, diag.residual, diag.group, diag.display)
    ]
    for g, curve in diag.curves.items():
        rows += [{"x": x, "residual": v, "group": g, "display": None, "curve": 1} for x, v in zip(curve.grid, curve.values)]
    with _open_out(args.out) as fh:
        write_table(fh, DIAGNOSE_COLUMNS, rows, args.format)
    return 0


def cmd_validate_scenario(args):
    spec = _load_scenario(args)
    report = validate_scenario(spec, args.n, args.seed)
    with _open_out(args.out) as fh:
        for key, val in report.as_items():
            text = str(val).lower() if isinstance(val, bool) else fmt(val)
            fh.write(f"{key} = {text}\n")
    return 0


def cmd_parse_check(args):
    ast = parse_expression(args.expression)
    value = eval_expression(ast, np.zeros(max(1, max_variable(ast))))
    print(f"normalized = {unparse(ast)}")
    print(f"value_at_origin = {fmt(value)}")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(2)


def build_parser():
    p = _Parser(prog="drmean", description="Population-mean estimators for incomplete data.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common_est(sp):
        sp.add_argument("--estimators", help="comma-separated estimator names")
        sp.add_argument("--basis", choices=sorted(BASES), default="spline")
        sp.add_argument("--delta", type=float, default=0.05)
        sp.add_argument("--ramp-width", type=float, default=0.01)

    def common_out(sp, formats=True):
        if formats:
            sp.add_argument("--format", choices=["csv", "jsonl"], default="csv")
        sp.add_argument("--out", help="output path (default stdout)")

    def scenario_args(sp, required):
        sp.add_argument("--scenario", required=required, help="scenario TOML file")
        sp.add_argument("--variant", action="append", choices=["alt_x4", "reversed"],
                        help="apply a named scenario variant (repeatable)")

    sp = sub.add_parser("simulate", help="Monte Carlo run over the specification grid")
    scenario_args(sp, True)
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--reps", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--grid", help=f"comma-separated cells from {','.join(GRID_CELLS)}")
    sp.add_argument("--epsilon", type=float, default=1e-6)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--mae", choices=["median", "mean"], default="median")
    sp.add_argument("--replicates", help="also write the replicate table here")
    sp.add_argument("--dump-sample", help="write replicate 0 as a dataset CSV here")
    common_est(sp)
    common_out(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="estimate the mean from a dataset CSV")
    sp.add_argument("--data", required=True)
    sp.add_argument("--epsilon", type=float, default=1e-6)
    common_est(sp)
    common_out(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("diagnose", help="residual diagnostic plot points")
    sp.add_argument("--data")
    scenario_args(sp, False)
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--axis", choices=sorted(AXES), default="eta")
    sp.add_argument("--fit-group", type=int, choices=[0, 1], default=1)
    sp.add_argument("--span", type=float, default=LOESS_SPAN)
    sp.add_argument("--degree", type=int, choices=[1, 2], default=LOESS_DEGREE)
    sp.add_argument("--grid-points", type=int, default=LOESS_GRID_POINTS)
    sp.add_argument("--display-fraction", type=float, default=0.2)
    sp.add_argument("--epsilon", type=float, default=1e-6)
    common_out(sp)
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("validate-scenario", help="report the design criteria of a scenario")
    scenario_args(sp, True)
    sp.add_argument("--n", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    common_out(sp, formats=False)
    sp.set_defaults(func=cmd_validate_scenario)

    sp = sub.add_parser("parse-check", help="parse a transformation expression")
    sp.add_argument("expression")
    sp.set_defaults(func=cmd_parse_check)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"drmean: error: {exc}", file=sys.stderr)
        return 2
    except ExpressionSyntaxError as exc:
        print(f"drmean: error: {exc}", file=sys.stderr)
        if exc.text:
            print(f"  {exc.text}\n  {' ' * exc.position}^", file=sys.stderr)
        return 2
    except (ConfigError, MalformedCsv, FileNotFoundError) as exc:
        print(f"drmean: error: {exc}", file=sys.stderr)
        return 2
    except DrMeanError as exc:
        print(f"drmean: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
