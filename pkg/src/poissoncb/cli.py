"""Command-line entry point.

Every command takes the seven model parameters from ``--config FILE`` and/or
inline flags (inline flags win), writes CSV or JSON to ``--out`` (stdout when
omitted) and echoes the resolved configuration at the top of its output.

Exit status: 0 success, 1 domain error, 2 numerical failure, 3 table
mismatch, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import __version__
from .analytic import AnalyticSolution, build_constrained_solution, price_constrained
from .errors import (ConfigError, DomainError, MismatchError, NumericalError, ParamMismatch,
                     PoissonCBError, SeedError, StrategyError)
from .model import PARAM_KEYS, ModelParams, Regime, bounds, classify_regime, validate_params
from .output import emit, render_csv, render_json

EXIT_OK, EXIT_DOMAIN, EXIT_NUMERICAL, EXIT_MISMATCH, EXIT_USAGE = 0, 1, 2, 3, 64
DEFAULT_SEED = 42


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {v}")
    return v


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_params(sp: argparse.ArgumentParser) -> None:
    g = sp.add_argument_group("model parameters (override --config)")
    g.add_argument("--config", "--case-params", dest="config", metavar="FILE",
                   help="JSON object with keys " + ", ".join(PARAM_KEYS))
    for key in PARAM_KEYS:
        g.add_argument(f"--{key}", dest=f"p_{key}", type=float, metavar="X")


def _add_output(sp: argparse.ArgumentParser, default_format: str = "csv") -> None:
    sp.add_argument("--out", metavar="PATH", help="output file (stdout if omitted)")
    sp.add_argument("--format", choices=("csv", "json"), default=None,
                    help=f"output format (default: from --out suffix, else {default_format})")
    sp.set_defaults(default_format=default_format)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="poissoncb", description="Perpetual convertible bonds with call and "
                 "conversion restricted to Poisson arrival times.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND", required=True)

    sp = sub.add_parser("price", help="closed-form constrained price")
    _add_params(sp)
    sp.add_argument("--s0", type=float, action="append", help="spot (repeatable)")
    sp.add_argument("--dump-solution", metavar="PATH", help="also write the solution as JSON")
    sp.add_argument("--solution", metavar="PATH", help="price from a dumped solution instead")
    _add_output(sp, "json")

    sp = sub.add_parser("boundary", help="conversion boundary and smooth-pasting report")
    _add_params(sp)
    sp.add_argument("--lambdas", type=_float_list, help="intensities (default: --lambda)")
    sp.add_argument("--coupons", type=_float_list, help="coupons (default: --c)")
    _add_output(sp)

    sp = sub.add_parser("ode-check", help="finite-difference oracle versus closed form")
    _add_params(sp)
    sp.add_argument("--nodes", type=_positive_int, default=2000)
    sp.add_argument("--s-min", type=float, default=None)
    _add_output(sp)

    sp = sub.add_parser("simulate", help="Monte Carlo value under a strategy pair")
    _add_params(sp)
    sp.add_argument("--s0", type=float, default=1.0)
    sp.add_argument("--paths", type=_positive_int, default=200_000)
    sp.add_argument("--seed", type=_nonneg_int, default=DEFAULT_SEED)
    sp.add_argument("--strategy", default="optimal",
                    help="'optimal', or 'firm=RULE', 'investor=RULE' or both joined by ','; "
                         "RULE is StopAtFirstArrival, StopAtTM, NeverBeforeTM, "
                         "ThresholdConvert[:LEVEL or :FACTORx]")
    sp.add_argument("--workers", type=_positive_int, default=None)
    _add_output(sp)

    sp = sub.add_parser("saddle", help="unilateral deviations on common random numbers")
    _add_params(sp)
    sp.add_argument("--s0", type=float, default=1.0)
    sp.add_argument("--paths", type=_positive_int, default=200_000)
    sp.add_argument("--seed", type=_nonneg_int, default=DEFAULT_SEED)
    sp.add_argument("--workers", type=_positive_int, default=None)
    _add_output(sp)

    sp = sub.add_parser("sweep", help="conversion boundary over intensities and coupons")
    _add_params(sp)
    sp.add_argument("--lambdas", type=_float_list, required=True)
    sp.add_argument("--coupons", type=_float_list, required=True)
    _add_output(sp)

    sp = sub.add_parser("table1", help="reproduce the conversion-boundary table")
    sp.add_argument("--tol", type=float, default=1e-3)
    _add_output(sp)

    sp = sub.add_parser("figure-data", help="value-versus-spot curves for plotting")
    _add_params(sp)
    sp.add_argument("--lambdas", type=_float_list, default=[1.0, 10.0, 100.0, 1000.0, 10000.0])
    sp.add_argument("--points", type=_positive_int, default=200)
    sp.add_argument("--s-max", type=float, default=None)
    _add_output(sp)
    return ap


def resolve_params(args) -> ModelParams:
    raw = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise UsageError(f"--config: cannot read {args.config}: {exc.strerror}")
        except json.JSONDecodeError as exc:
            raise UsageError(f"--config: {args.config} is not valid JSON ({exc.msg})")
        if not isinstance(raw, dict):
            raise UsageError(f"--config: {args.config} must hold a JSON object")
    for key in PARAM_KEYS:
        v = getattr(args, f"p_{key}")
        if v is not None:
            raw[key] = v
    missing = [k for k in PARAM_KEYS if k not in raw]
    if missing:
        raise UsageError("missing parameters: " + ", ".join(f"--{k}" for k in missing))
    return validate_params(raw)


def _format(args) -> str:
    if args.format:
        return args.format
    if args.out and Path(args.out).suffix.lower() in (".json", ".csv"):
        return Path(args.out).suffix.lower()[1:]
    return args.default_format


def _config_echo(args, params: ModelParams | None, extra: dict) -> dict:
    cfg = {"command": args.command, "version": __version__}
    if params is not None:
        cfg["params"] = params.to_dict()
    cfg.update(extra)
    return cfg


def _header_lines(cfg: dict) -> list[str]:
    lines = [f"poissoncb {cfg['version']} {cfg['command']}"]
    if "params" in cfg:
        lines.append("params: " + " ".join(f"{k}={v!r}" for k, v in cfg["params"].items()))
    for k, v in cfg.items():
        if k not in ("command", "version", "params"):
            lines.append(f"{k}: {v}")
    return lines


def _write_table(args, cfg, columns, rows, extra_json=None):
    if _format(args) == "json":
        payload = {"config": cfg, "columns": list(columns),
                   "rows": [dict(zip(columns, r)) for r in rows]}
        if extra_json:
            payload.update(extra_json)
        emit(render_json(payload), args.out)
    else:
        emit(render_csv(_header_lines(cfg), columns, rows), args.out)


def cmd_price(args):
    if args.solution:
        try:
            with open(args.solution, encoding="utf-8") as fh:
                sol = AnalyticSolution.from_dict(json.load(fh))
        except OSError as exc:
            raise UsageError(f"--solution: cannot read {args.solution}: {exc.strerror}")
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, PoissonCBError):
                raise
            raise UsageError(f"--solution: {args.solution} is not a dumped solution ({exc})")
        p = sol.params
    else:
        p = resolve_params(args)
        sol = build_constrained_solution(p)
    if args.dump_solution:
        emit(render_json(sol.to_dict()), args.dump_solution)
    spots = args.s0 or [1.0]
    cfg = _config_echo(args, p, {"s0": spots})
    rows = []
    for s in spots:
        lo, up = bounds(p, s)
        rows.append({"s0": s, "value": price_constrained(sol, s), "lower_bound": lo,
                     "upper_bound": up})
    x_star = sol.x_star if sol.regime is Regime.CASE_III else None
    if _format(args) == "json":
        payload = {"config": cfg, "regime": sol.regime.value, "sbar": sol.sbar, "x_star": x_star}
        if len(rows) == 1:
            r = rows[0]
            payload.update({"s0": r["s0"], "value": r["value"],
                            "bounds": {"lower": r["lower_bound"], "upper": r["upper_bound"]}})
        else:
            payload["prices"] = rows
        emit(render_json(payload), args.out)
    else:
        cols = ["s0", "value", "lower_bound", "upper_bound", "regime", "x_star"]
        x = math.nan if x_star is None else x_star
        _write_table(args, cfg, cols, [[r["s0"], r["value"], r["lower_bound"], r["upper_bound"],
                                        sol.regime.value, x] for r in rows])
    return EXIT_OK


def cmd_boundary(args):
    from .boundary import locate_conversion_boundary, verify_smooth_pasting

    p = resolve_params(args)
    lambdas = args.lambdas or [p.lam]
    coupons = args.coupons or [p.c]
    cfg = _config_echo(args, p, {"lambdas": lambdas, "coupons": coupons})
    cols = ["lambda", "c", "x_star", "residual", "sign_changes", "pasting_mismatch",
            "slope_below_gamma", "lower_convex", "upper_concave", "below_payoff", "pasting_ok"]
    rows = []
    for lam in lambdas:
        for c in coupons:
            q = p.with_lambda(lam).with_coupon(c)
            root = locate_conversion_boundary(q)
            rep = verify_smooth_pasting(q, root.x_star, strict=False)
            rows.append([lam, c, root.x_star, root.residual, root.sign_changes, rep.mismatch,
                         rep.slope_below_gamma, rep.lower_convex, rep.upper_concave,
                         rep.below_payoff, rep.ok])
    _write_table(args, cfg, cols, rows)
    return EXIT_OK


def cmd_ode_check(args):
    from .oracle import compare_to_analytic, solve_penalized_ode

    p = resolve_params(args)
    g = solve_penalized_ode(p, args.nodes, args.s_min)
    sol = build_constrained_solution(p)
    rep = compare_to_analytic(g, sol)
    exact = price_constrained(sol, g.nodes)
    cfg = _config_echo(args, p, {"nodes": args.nodes, "s_min": g.s_min,
                                 "sup_error": rep.sup_error, "l2_error": rep.l2_error,
                                 "order": rep.order, "truncation_bound": rep.truncation_bound,
                                 "policy_iterations": g.iterations})
    rows = [[s, a, v, abs(v - a)] for s, a, v in zip(g.nodes, exact, g.values)]
    _write_table(args, cfg, ["node", "analytic", "grid", "abs_error"], rows)
    return EXIT_OK


def _parse_strategy(text: str, p: ModelParams):
    from .game.strategies import StrategyPair, optimal_strategy, rule_from_name

    x_star = None
    if classify_regime(p) is Regime.CASE_III:
        from .boundary import solve_conversion_boundary

        x_star = solve_conversion_boundary(p)
    pair = optimal_strategy(p, x_star)
    if text == "optimal":
        return pair
    firm, inv = pair.firm, pair.investor
    for part in text.split(","):
        side, sep, name = part.partition("=")
        if not sep or side.strip() not in ("firm", "investor"):
            raise UsageError(f"--strategy: cannot parse {part!r}")
        try:
            rule = rule_from_name(name.strip(), x_star)
        except StrategyError as exc:
            raise UsageError(f"--strategy: {exc}")
        if side.strip() == "firm":
            firm = rule
        else:
            inv = rule
    return StrategyPair(firm, inv)


def cmd_simulate(args):
    from .game.montecarlo import simulate_value

    p = resolve_params(args)
    pair = _parse_strategy(args.strategy, p)
    rep = simulate_value(p, args.s0, pair, args.paths, args.seed, n_workers=args.workers)
    cfg = _config_echo(args, p, {"s0": args.s0, "paths": args.paths, "seed": args.seed,
                                 "strategy": pair.label, "horizon": rep.horizon})
    row = rep.as_row()
    _write_table(args, cfg, list(row), [list(row.values())])
    return EXIT_OK


def cmd_saddle(args):
    from .game.diagnostics import saddle_check

    p = resolve_params(args)
    rep = saddle_check(p, args.s0, args.paths, args.seed, n_workers=args.workers)
    cfg = _config_echo(args, p, {"s0": args.s0, "paths": args.paths, "seed": args.seed,
                                 "x_star": rep.x_star, "optimal": rep.optimal,
                                 "optimal_se": rep.optimal_se, "saddle_ok": rep.ok})
    rows = [["optimal", "-", rep.optimal, 0.0, 0.0, True]]
    rows += [[d.player, d.rule, d.estimate, d.gap, d.paired_se, d.ok] for d in rep.deviations]
    _write_table(args, cfg, ["player", "rule", "estimate", "gap", "paired_se", "ok"], rows)
    return EXIT_OK


def cmd_sweep(args):
    from .asymptotics import boundary_sweep

    p = resolve_params(args)
    rows = boundary_sweep(p, args.lambdas, args.coupons)
    cfg = _config_echo(args, p, {"lambdas": args.lambdas, "coupons": args.coupons,
                                 "failed_rows": sum(r.failed for r in rows)})
    cols = ["lambda", "c", "x_star_lambda", "s_bar_lambda", "limit_target", "target_kind", "gap",
            "error"]
    _write_table(args, cfg, cols, [[r.lam, r.c, r.x_star_lambda, r.s_bar_lambda, r.limit_target,
                                    r.target_kind, r.gap, r.error] for r in rows])
    return EXIT_OK


def cmd_table1(args):
    from .asymptotics import TABLE1_PARAMS, reproduce_table1

    t = reproduce_table1(args.tol, strict=False)
    cfg = {"command": args.command, "version": __version__,
           "params": {k: TABLE1_PARAMS[k] for k in ("r", "q", "sigma", "K", "gamma")},
           "note": t.note, "tolerance": args.tol,
           "status": "match" if t.ok else f"{len(t.mismatches)} cells outside tolerance"}
    cols = ["row"] + [f"c={c:g}" for c in t.coupons]
    rows = [[f"lambda={lam:g}"] + list(t.grid[i]) for i, lam in enumerate(t.lambdas)]
    rows.append(["x*"] + list(t.x_star_row))
    rows.append(["sbar"] + list(t.sbar_row))
    rows.append(["limit"] + list(t.limit_kind))
    extra = {"mismatches": [{"cell": n, "got": g, "expected": w} for n, g, w in t.mismatches]}
    _write_table(args, cfg, cols, rows, extra)
    if not t.ok:
        raise MismatchError(t.mismatches)
    return EXIT_OK


def cmd_figure_data(args):
    from .asymptotics import figure_data

    p = resolve_params(args)
    header, data, markers = figure_data(p, args.lambdas, args.s_max, args.points)
    marks = "; ".join(f"lambda={lam:g}: x*={x:.12g}, sbar={sb:.12g}" for lam, x, sb in markers)
    cfg = _config_echo(args, p, {"lambdas": args.lambdas, "points": args.points,
                                 "boundaries": marks})
    _write_table(args, cfg, header, data.tolist())
    return EXIT_OK


HANDLERS = {"price": cmd_price, "boundary": cmd_boundary, "ode-check": cmd_ode_check,
            "simulate": cmd_simulate, "saddle": cmd_saddle, "sweep": cmd_sweep,
            "table1": cmd_table1, "figure-data": cmd_figure_data}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return HANDLERS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"poissoncb {args.command}: usage error: {exc}\n")
        return EXIT_USAGE
    except MismatchError as exc:
        sys.stderr.write(f"poissoncb {args.command}: {exc}\n")
        return EXIT_MISMATCH
    except NumericalError as exc:
        sys.stderr.write(f"poissoncb {args.command}: numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except (DomainError, ConfigError, SeedError, StrategyError, ParamMismatch) as exc:
        sys.stderr.write(f"poissoncb {args.command}: {exc}\n")
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
