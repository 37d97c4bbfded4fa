"""Command-line entry point: ``greenshare run|sweep|validate``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiments import DEFAULT_RE_BUDGET_WH, MODES, emit, render, run, sweep
from .scenario import BUNDLED, Scenario, ScenarioError, bundled_path, load_scenario, with_updates
from .sleeping import PRICE_GATES, REPRICE, ScenarioInfeasible

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3


def _scenario(args) -> Scenario:
    src = args.scenario
    path = Path(src)
    if not path.exists() and src in BUNDLED:
        path = bundled_path(src)
    scenario = load_scenario(path)
    if getattr(args, "resolution", None) is not None:
        res = args.resolution

        def edit(d):
            d["resolution_per_km"] = res

        scenario = with_updates(scenario, edit)
    return scenario


def _values(text: str) -> list[float]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ScenarioError("--values needs at least one number")
    try:
        return [float(t) for t in items]
    except ValueError:
        raise ScenarioError(f"--values must be comma-separated numbers, got {text!r}") from None


def _format(args) -> str:
    if args.format:
        return args.format
    return "csv" if args.out and str(args.out).endswith(".csv") else "json"


def _write(reports, args) -> None:
    fmt = _format(args)
    if args.out:
        emit(reports, fmt, args.out)
    else:
        sys.stdout.write(render(reports, fmt))


def _solver_options(args) -> dict:
    return {"price_gate": args.price_gate, "reprice": args.reprice}


def cmd_run(args) -> int:
    report = run(_scenario(args), args.mode, **_solver_options(args))
    _write(report, args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = _scenario(args)
    reports = sweep(scenario, args.axis, _values(args.values), mode=args.mode,
                    re_budget_wh=args.re_budget_wh, **_solver_options(args))
    _write(reports, args)
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario = _scenario(args)
    n_bs = [o.n_bs for o in scenario.operators]
    print(f"{scenario.name}: {scenario.n_ops} operators, BSs {'+'.join(map(str, n_bs))}, "
          f"users {'/'.join(f'{sum(o.users):g}' for o in scenario.operators)}")
    return EXIT_OK


def _common(p: argparse.ArgumentParser, outputs: bool = True) -> None:
    p.add_argument("--scenario", required=True, help=f"scenario file, or one of: {', '.join(BUNDLED)}")
    p.add_argument("--resolution", type=float, help="quadrature points per km (overrides the file)")
    if outputs:
        p.add_argument("--out", help="output file (stdout when omitted)")
        p.add_argument("--format", choices=("json", "csv"), help="report format (default: from --out suffix, else json)")
        p.add_argument("--price-gate", choices=PRICE_GATES, default="deferred",
                       help="reject switch-off candidates without profitable prices (strict) or leave it to the rollback")
        p.add_argument("--reprice", choices=REPRICE, default="selected",
                       help="solve the price game for every candidate or only for the recorded states")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="greenshare", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment")
    _common(p)
    p.add_argument("--mode", choices=MODES, default="collab")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="rerun an experiment over one parameter")
    _common(p)
    p.add_argument("--axis", required=True, help="pi_<op>, n_users_<op>[:<service>] or beta_re")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--mode", choices=MODES, default="collab")
    p.add_argument("--re-budget-wh", type=float, default=DEFAULT_RE_BUDGET_WH,
                   help="renewable budget split by the beta_re axis")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check a scenario file")
    _common(p, outputs=False)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ScenarioInfeasible as exc:
        print(f"infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
