"""Command-line surface.

Subcommands: evaluate, optimize, equilibrium, verify, examples, generate.
Exit codes: 0 ok, 1 validation or parse error, 2 resource limit exceeded.
Certificate failures from `verify` are findings, not errors, and leave the
exit code at 0 unless --strict is given.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from . import bounds as bounds_mod
from .analysis import (
    DEFAULT_SCENARIO_LIMIT,
    enumerate_scenarios,
    expected_welfare,
    optimize_cap_and_price,
    optimize_safe,
    sell_out_probability,
)
from .auction import (
    HIGHEST_LOSING,
    LOWEST_WINNING,
    AuctionParams,
    price_candidates,
    run_auction,
    safe_price,
)
from .equilibrium import (
    DEFAULT_PROFILE_LIMIT,
    check_poa_bound,
    find_grid_equilibria,
)
from .instances import NAMED_INSTANCES, generate, named_instance
from .io import (
    format_decimal,
    format_rational,
    load_instance,
    rational_columns,
    save_instance,
    write_csv,
)
from .model import MarketError, TooLargeError, ValidationError, rat, validate

VERIFY_CHECKS = ("priceceil", "optcond", "unsafe", "decomp", "thmq", "main", "all")


def _fmt(value: Fraction | None) -> str:
    if value is None:
        return "inf"
    return f"{format_rational(value)} ({format_decimal(value)})"


def _parse_cap(text: str) -> int | None:
    if text in ("unbounded", "inf"):
        return None
    try:
        cap = int(text)
    except ValueError:
        raise ValidationError(f"cap must be an integer or 'unbounded', got {text!r}")
    return cap


def _parse_ceiling(text: str) -> Fraction | None:
    if text in ("inf", "none"):
        return None
    return rat(text)


def _emit(args, header, rows) -> None:
    if args.out:
        write_csv(args.out, header, rows)
        print(f"report written to {args.out}")


def cmd_evaluate(args) -> int:
    instance = load_instance(args.instance)
    params = AuctionParams(
        cap=_parse_cap(args.cap),
        floor=rat(args.floor),
        ceiling=_parse_ceiling(args.ceiling),
        pricing=args.pricing,
    )
    table = enumerate_scenarios(instance, args.scenario_limit)
    header = ["scenario"]
    cols0 = None
    rows = []
    welfare_total = Fraction(0)
    revenue_total = Fraction(0)
    for idx, row in enumerate(table.rows):
        outcome = run_auction(params, row.valuations, instance.cost)
        welfare_total += row.probability * outcome.welfare
        revenue_total += row.probability * outcome.revenue
        cols = (
            rational_columns("probability", row.probability)
            + [("allocation", "|".join(str(x) for x in outcome.allocation))]
            + rational_columns("unit_price", outcome.unit_price)
            + [("case", outcome.case)]
            + rational_columns("welfare", outcome.welfare)
            + rational_columns("revenue", outcome.revenue)
        )
        if cols0 is None:
            cols0 = [name for name, _ in cols]
            header += cols0
        rows.append([str(idx)] + [value for _, value in cols])

    print(f"instance: {instance.label or args.instance}")
    print(f"scenarios: {len(table.rows)}")
    print(f"expected welfare: {_fmt(welfare_total)}")
    print(f"expected revenue: {_fmt(revenue_total)}")
    if params.cap is not None:
        q = sell_out_probability(instance, params, table)
        print(f"sell-out probability: {_fmt(q)}")
    _emit(args, header, rows)
    return 0


def cmd_optimize(args) -> int:
    instance = load_instance(args.instance)
    if args.safe_only:
        result = optimize_safe(
            instance, cap_limit=args.cap_limit, scenario_limit=args.scenario_limit,
            threads=args.threads,
        )
        kind = "best safe-price auction"
    else:
        result = optimize_cap_and_price(
            instance,
            allow_ceiling=not args.no_ceiling,
            cap_limit=args.cap_limit,
            scenario_limit=args.scenario_limit,
            threads=args.threads,
        )
        kind = "best cap-and-price auction"
    p = result.params
    print(f"instance: {instance.label or args.instance}")
    print(f"{kind} over {result.searched} candidates:")
    print(f"  cap: {p.cap}")
    print(f"  floor: {_fmt(p.floor)}")
    print(f"  ceiling: {_fmt(p.ceiling)}")
    print(f"  expected welfare: {_fmt(result.expected_welfare)}")
    header = ["cap", "floor", "floor_dec", "ceiling", "ceiling_dec", "welfare", "welfare_dec"]
    rows = []
    for cand in result.table:
        row = [str(cand.cap)]
        for _, v in rational_columns("floor", cand.floor):
            row.append(v)
        for _, v in rational_columns("ceiling", cand.ceiling):
            row.append(v)
        for _, v in rational_columns("welfare", cand.expected_welfare):
            row.append(v)
        rows.append(row)
    _emit(args, header, rows)
    return 0


def cmd_equilibrium(args) -> int:
    instance = load_instance(args.instance)
    cap = _parse_cap(args.cap)
    if cap is None:
        raise ValidationError("equilibrium search needs a bounded cap")
    params = AuctionParams(cap=cap, floor=rat(args.floor), ceiling=None, pricing=args.pricing)
    report = find_grid_equilibria(
        instance,
        params,
        epsilon=rat(args.epsilon),
        strict=args.strict_overbidding,
        profile_limit=args.profile_limit,
    )
    print(f"instance: {instance.label or args.instance}")
    print(f"profiles searched: {report.searched}")
    print(f"equilibria found: {len(report.profiles)}")
    if report.worst_welfare is not None:
        print(f"worst equilibrium welfare: {_fmt(report.worst_welfare)}")
    if params.floor == safe_price(instance.cost, cap):
        poa = check_poa_bound(instance, cap, report)
        print(f"safe-price baseline welfare: {_fmt(poa.baseline)}")
        print(f"welfare floor (baseline/3.15): {_fmt(poa.bound)}")
        if poa.ratio is not None:
            print(f"worst/baseline ratio: {_fmt(poa.ratio)}")
        print(f"bound holds: {poa.holds} ({poa.status})")
    header = ["profile", "firm", "type", "bid", "utility", "utility_dec", "welfare", "welfare_dec"]
    rows = []
    for k, profile in enumerate(report.profiles):
        for i, per_type in enumerate(profile.reports):
            for t, report_vec in enumerate(per_type):
                bid = "|".join(format_rational(v) for v in report_vec.marginals)
                u = report.utilities[k][i][t]
                w = report.welfares[k]
                rows.append(
                    [str(k), str(i), str(t), bid,
                     format_rational(u), format_decimal(u),
                     format_rational(w), format_decimal(w)]
                )
    _emit(args, header, rows)
    return 0


def _certificate_rows(certs) -> list[list[str]]:
    rows = []
    for cert in certs:
        holds = "n/a" if cert.holds is None else ("pass" if cert.holds else "FAIL")
        rows.append(
            [
                cert.name,
                holds,
                cert.status,
                format_rational(cert.lhs),
                format_decimal(cert.lhs),
                format_rational(cert.rhs),
                format_decimal(cert.rhs),
                format_rational(cert.margin),
                "; ".join(f"{k}={v}" for k, v in sorted(cert.witness.items(), key=lambda kv: kv[0])),
            ]
        )
    return rows


def cmd_verify(args) -> int:
    instance = load_instance(args.instance)
    which = args.which
    certs = []
    opt = None

    def optimum():
        nonlocal opt
        if opt is None:
            opt = optimize_cap_and_price(
                instance, allow_ceiling=False, cap_limit=args.cap_limit,
                scenario_limit=args.scenario_limit, threads=args.threads,
            )
        return opt

    if which in ("priceceil", "all"):
        grid = price_candidates(instance)
        ceiling = rat(args.ceiling) if args.ceiling not in (None, "inf") else grid[-1]
        cap = _parse_cap(args.cap) if args.cap else optimum().params.cap
        floor = rat(args.floor) if args.floor is not None else optimum().params.floor
        if ceiling <= floor:
            floor = min(f for f in grid if f < ceiling)
        certs.append(
            bounds_mod.verify_ceiling_removal(
                instance, AuctionParams(cap, floor, ceiling),
                cap_limit=args.cap_limit, scenario_limit=args.scenario_limit,
            )
        )
    if which in ("optcond", "all"):
        certs.append(
            bounds_mod.verify_sellout_conditional(
                instance, optimum().params, scenario_limit=args.scenario_limit
            )
        )
    if which in ("unsafe", "all"):
        limit = args.cap_limit or 20
        worst = None
        for quantity in range(1, limit + 1):
            for units in range(quantity + 1):
                cert = bounds_mod.verify_price_gap(instance.cost, quantity, units)
                if worst is None or cert.margin < worst.margin:
                    worst = cert
        certs.append(worst)
    if which in ("decomp", "all"):
        cap = _parse_cap(args.cap) if args.cap else optimum().params.cap
        floor = rat(args.floor) if args.floor is not None else optimum().params.floor
        report = bounds_mod.decompose_welfare(
            instance, cap, floor, scenario_limit=args.scenario_limit
        )
        certs.append(
            bounds_mod.BoundCertificate(
                name="three-term-decomposition",
                lhs=report.term_sum,
                rhs=report.total_welfare,
                holds=report.bounded,
                witness={
                    "cap": cap,
                    "floor": format_rational(report.floor),
                    "sell_out_term": format_rational(report.sell_out_term),
                    "above_term": format_rational(report.above_term),
                    "below_term": format_rational(report.below_term),
                },
            )
        )
        certs.extend(
            bounds_mod.verify_decomposition_bounds(
                instance, cap, floor, report, scenario_limit=args.scenario_limit
            )
        )
    if which in ("thmq", "all"):
        certs.append(
            bounds_mod.verify_sellout_factor(
                instance, optimum(), cap_limit=args.cap_limit,
                scenario_limit=args.scenario_limit,
            )
        )
    if which in ("main", "all"):
        certs.extend(
            bounds_mod.verify_single_buyer_cover(
                instance, optimum(), cap_limit=args.cap_limit,
                scenario_limit=args.scenario_limit,
            )
        )

    print(f"instance: {instance.label or args.instance}")
    failed = 0
    for cert in certs:
        holds = "n/a" if cert.holds is None else ("pass" if cert.holds else "FAIL")
        if cert.holds is False:
            failed += 1
        print(
            f"[{holds:>4}] {cert.name} ({cert.status}): "
            f"lhs {_fmt(cert.lhs)} vs rhs {_fmt(cert.rhs)}, margin {_fmt(cert.margin)}"
        )
    header = ["certificate", "holds", "status", "lhs", "lhs_dec", "rhs", "rhs_dec", "margin", "witness"]
    _emit(args, header, _certificate_rows(certs))
    if failed and args.strict:
        return 1
    return 0


def cmd_examples(args) -> int:
    instance = named_instance(args.name, n=args.n, horizon=args.horizon)
    save_instance(instance, args.out)
    print(f"wrote {instance.label} to {args.out}")
    return 0


def cmd_generate(args) -> int:
    instance = generate(
        seed=args.seed,
        firms=args.firms,
        scenarios_per_firm=args.scenarios,
        max_units=args.max_units,
        value_low=args.value_range[0],
        value_high=args.value_range[1],
        cost_kind=args.cost_kind,
    )
    problems = validate(instance)
    if problems:  # generator contract: never happens
        raise ValidationError("; ".join(problems))
    save_instance(instance, args.out)
    print(f"wrote {instance.label} to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capauction",
        description="Capped uniform-price license auctions: simulate, optimize, verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, profile=False):
        p.add_argument("--out", help="write the CSV report here")
        p.add_argument("--scenario-limit", type=int, default=DEFAULT_SCENARIO_LIMIT)
        p.add_argument("--threads", type=int, default=1,
                       help="max worker processes for candidate evaluation")
        if profile:
            p.add_argument("--profile-limit", type=int, default=DEFAULT_PROFILE_LIMIT)

    p = sub.add_parser("evaluate", help="expected welfare of fixed parameters")
    p.add_argument("instance")
    p.add_argument("--cap", required=True, help="positive integer or 'unbounded'")
    p.add_argument("--floor", required=True)
    p.add_argument("--ceiling", default="inf")
    p.add_argument("--pricing", choices=(LOWEST_WINNING, HIGHEST_LOSING),
                   default=LOWEST_WINNING)
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("optimize", help="exhaustive search for the best parameters")
    p.add_argument("instance")
    p.add_argument("--no-ceiling", action="store_true")
    p.add_argument("--safe-only", action="store_true")
    p.add_argument("--cap-limit", type=int)
    common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("equilibrium", help="enumerate grid equilibria")
    p.add_argument("instance")
    p.add_argument("--cap", required=True)
    p.add_argument("--floor", required=True)
    p.add_argument("--pricing", choices=(LOWEST_WINNING, HIGHEST_LOSING),
                   default=HIGHEST_LOSING)
    p.add_argument("--epsilon", default="0")
    p.add_argument("--strict-overbidding", action="store_true",
                   help="dominate marginal by marginal instead of prefix sums")
    common(p, profile=True)
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("verify", help="check the welfare guarantees")
    p.add_argument("instance")
    p.add_argument("--which", choices=VERIFY_CHECKS, default="all")
    p.add_argument("--cap")
    p.add_argument("--floor")
    p.add_argument("--ceiling")
    p.add_argument("--cap-limit", type=int)
    p.add_argument("--strict", action="store_true",
                   help="exit nonzero when a certificate fails")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("examples", help="emit a built-in instance file")
    p.add_argument("name", choices=NAMED_INSTANCES)
    p.add_argument("-n", type=int, default=5, help="scenario count for the scaled families")
    p.add_argument("--horizon", type=int, help="marginal-list truncation for first-best")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_examples)

    p = sub.add_parser("generate", help="seeded random instance")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--firms", type=int, default=2)
    p.add_argument("--scenarios", type=int, default=2)
    p.add_argument("--max-units", type=int, default=4)
    p.add_argument("--value-range", type=int, nargs=2, default=(1, 12))
    p.add_argument("--cost-kind", choices=("quadratic", "marginals"), default="quadratic")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TooLargeError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, MarketError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
