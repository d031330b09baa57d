"""Command-line front end.

Subcommands: analyze | critical-rate | classify | sweep | verify | prototype.
All floats are printed with 17 significant digits so repeated runs are
byte-identical.  Exit codes: 0 success, 2 field-analysis fault, 3 infeasible
arclength budget, 4 verification failure, 1 anything else.
"""
from __future__ import annotations

import argparse
import math
import sys

from .classify import classify as classify_profile
from .control import InfeasibleBudgetError, critical_rate
from .field import FieldAnalysisError, ParseError
from .forcing import parse_forcing_spec
from .harness import (THREADS_ENV_VAR, VerificationFailure, build_field,
                      prototype_failures, prototype_rows_to_csv,
                      prototype_table, run_sweep, run_verification,
                      sweep_rows_to_csv)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FIELD_FAULT = 2
EXIT_INFEASIBLE_BUDGET = 3
EXIT_VERIFICATION_FAILURE = 4


# --------------------------------------------------------------------------
# deterministic JSON rendering (17 significant digits, quoted infinities)
# --------------------------------------------------------------------------

def _json_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int,)):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return '"inf"' if value > 0 else '"-inf"'
        if math.isnan(value):
            return '"nan"'
        return f"{value:.17g}"
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if value is None:
        return "null"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_json_value(v) for v in value) + "]"
    if isinstance(value, dict):
        parts = [f'{_json_value(str(k))}: {_json_value(v)}'
                 for k, v in value.items()]
        return "{" + ", ".join(parts) + "}"
    raise TypeError(f"cannot render {type(value).__name__} as JSON")


def render_json(obj: dict) -> str:
    return _json_value(obj) + "\n"


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.17g}"
    if isinstance(value, (list, tuple)):
        return ";".join(_csv_cell(v) for v in value)
    return str(value)


def _emit_record(payload: dict, args) -> None:
    """One logical record: JSON object by default, one-row CSV on --csv."""
    if getattr(args, "csv", False):
        header = ",".join(payload.keys())
        row = ",".join(_csv_cell(v) for v in payload.values())
        _emit(header + "\n" + row + "\n", args.out)
    else:
        _emit(render_json(payload), args.out)


def _emit_table(csv_text: str, rows_payload: list[dict], args) -> None:
    """Tabular output: CSV by default, a JSON row list on --json."""
    if getattr(args, "json", False):
        _emit(render_json({"rows": rows_payload}), args.out)
    else:
        _emit(csv_text, args.out)


def _interval(args) -> tuple[float, float] | None:
    if args.interval is None:
        return None
    return (args.interval[0], args.interval[1])


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    _, geometry = build_field(args.field, args.attractor, _interval(args))
    payload = {
        "field": args.field,
        "a": geometry.attractor,
        "alpha": geometry.alpha,
        "beta": geometry.beta,
        "R": geometry.radius,
        "mu_minus": geometry.mu_minus,
        "mu_plus": geometry.mu_plus,
        "mu": geometry.mu,
    }
    _emit_record(payload, args)
    return EXIT_OK


def cmd_critical_rate(args) -> int:
    field, geometry = build_field(args.field, args.attractor, _interval(args))
    rate = critical_rate(geometry, field, args.arclength)
    payload = {
        "field": args.field,
        "arclength": rate.arclength,
        "m_c": rate.m_c,
        "side": rate.side,
        "bracket_lo": rate.bracket[0],
        "bracket_hi": rate.bracket[1],
    }
    _emit_record(payload, args)
    return EXIT_OK


def cmd_classify(args) -> int:
    field, geometry = build_field(args.field, args.attractor, _interval(args))
    profile = parse_forcing_spec(args.forcing)
    outcome = classify_profile(field, geometry, profile)
    _emit_record(outcome.to_json_dict(), args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    rows = run_sweep(args.field, args.attractor, args.l_min, args.l_max,
                     args.steps)
    rows_payload = [{"L": r.arclength, "m_c": r.m_c, "side": r.side,
                     "j_residual": r.j_residual} for r in rows]
    _emit_table(sweep_rows_to_csv(rows), rows_payload, args)
    return EXIT_OK


def cmd_verify(args) -> int:
    report = run_verification(args.field, args.attractor, args.arclength,
                              n_samples=args.samples, seed=args.seed,
                              margin=args.margin, workers=args.workers)
    payload = {
        "field": report.field_text,
        "attractor": report.attractor,
        "arclength": report.arclength,
        "m_c": report.m_c,
        "side": report.side,
        "margin": report.margin,
        "speed_cap": report.speed_cap,
        "n_samples": report.n_samples,
        "n_tracks": report.n_tracks,
        "n_tips": report.n_tips,
        "violating_seeds": report.violating_seeds,
        "tightness_upper_tips": report.tightness_upper_tips,
        "tightness_lower_tracks": report.tightness_lower_tracks,
        "threshold_estimate": report.threshold_estimate,
        "wall_time_s": report.wall_time,
        "passed": report.passed,
    }
    _emit_record(payload, args)
    if not report.passed:
        raise VerificationFailure(
            f"{report.n_tips} tipping outcomes under the speed cap "
            f"(violating seeds: {report.violating_seeds}); this indicates an "
            "implementation bug, not a counterexample")
    return EXIT_OK


def cmd_prototype(args) -> int:
    rows = prototype_table()
    rows_payload = [{"lambda_inf": r.lambda_inf,
                     "r_c_closed_form": r.r_c_closed_form,
                     "r_star_bracket": r.r_star_bracket,
                     "m_c_implicit": r.m_c_implicit,
                     "m_star_bracket": r.m_star_bracket,
                     "m_c_general": r.m_c_general} for r in rows]
    _emit_table(prototype_rows_to_csv(rows), rows_payload, args)
    problems = prototype_failures(rows)
    if problems:
        raise VerificationFailure("; ".join(problems))
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _add_field_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--field", required=True,
                        help="field expression in x, e.g. 'x^2-1'")
    parser.add_argument("--attractor", type=float, required=True,
                        help="designated attracting equilibrium")
    parser.add_argument("--interval", type=float, nargs=2, metavar=("LO", "HI"),
                        help="equilibrium search interval "
                             "(default attractor +/- 100)")


def _add_format_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--json", action="store_true",
                       help="force JSON output")
    group.add_argument("--csv", action="store_true",
                       help="force CSV output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tipcrit",
        description="Critical forcing speeds and tipping classification "
                    "for scalar systems x' = f(x + forcing(t)).")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="basin geometry report (JSON)")
    _add_field_options(p)
    _add_format_options(p)
    p.add_argument("--out", help="write output to a file instead of stdout")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("critical-rate",
                       help="critical speed for an arclength budget (JSON)")
    _add_field_options(p)
    _add_format_options(p)
    p.add_argument("--arclength", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_critical_rate)

    p = sub.add_parser("classify",
                       help="classify a forcing as tracks/critical/tips (JSON)")
    _add_field_options(p)
    _add_format_options(p)
    p.add_argument("--forcing", required=True,
                   help="forcing spec: pl:LAM:SLOPE | tanh:LAM:R | "
                        "knots:t0,v0;t1,v1;... | random:L:CAP:N:SEED")
    p.add_argument("--out")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sweep",
                       help="critical rate over an arclength grid (CSV)")
    _add_field_options(p)
    _add_format_options(p)
    p.add_argument("--l-min", type=float, required=True)
    p.add_argument("--l-max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify",
                       help="Monte-Carlo necessity and tightness check (JSON)")
    _add_field_options(p)
    _add_format_options(p)
    p.add_argument("--arclength", type=float, required=True)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--margin", type=float, default=0.95,
                   help="speed cap as a fraction of m_c (default 0.95)")
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (default: {THREADS_ENV_VAR} "
                        "or CPU count)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("prototype",
                       help="prototype critical-value comparison table (CSV)")
    _add_format_options(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_prototype)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, FieldAnalysisError) as exc:
        print(f"tipcrit: field analysis fault: {exc}", file=sys.stderr)
        return EXIT_FIELD_FAULT
    except InfeasibleBudgetError as exc:
        print(f"tipcrit: infeasible arclength budget: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE_BUDGET
    except VerificationFailure as exc:
        print(f"tipcrit: verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION_FAILURE
    except Exception as exc:  # noqa: BLE001 - uniform CLI error reporting
        print(f"tipcrit: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
