"""Exact expected-welfare analysis over discrete valuation distributions.

Expectations are full enumerations of the (product or explicit joint)
scenario space; parameter search is exhaustive over the finite price grid
and cap range, so optimization results are exact rather than approximate.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .auction import (
    AuctionParams,
    LOWEST_WINNING,
    make_safe_auction,
    price_candidates,
    run_auction,
    single_buyer_mechanism,
)
from .model import (
    ZERO,
    MarginalVector,
    MarketInstance,
    TooLargeError,
    ValidationError,
    rat,
)

DEFAULT_SCENARIO_LIMIT = 100_000


@dataclass(frozen=True)
class ScenarioRow:
    probability: Fraction
    valuations: tuple[MarginalVector, ...]


@dataclass(frozen=True)
class ScenarioTable:
    rows: tuple[ScenarioRow, ...]

    def __len__(self) -> int:
        return len(self.rows)

    def total_probability(self) -> Fraction:
        return sum((r.probability for r in self.rows), ZERO)


def enumerate_scenarios(
    instance: MarketInstance, limit: int = DEFAULT_SCENARIO_LIMIT
) -> ScenarioTable:
    """Materialize the joint scenario space with exact probabilities.

    Product instances take the cartesian product of per-firm scenarios;
    joint instances pass their explicit table through. Raises TooLargeError
    before materializing anything bigger than `limit`.
    """
    if instance.joint is not None:
        if len(instance.joint) > limit:
            raise TooLargeError(
                f"joint table has {len(instance.joint)} rows, limit {limit}"
            )
        return ScenarioTable(
            tuple(ScenarioRow(p, vs) for p, vs in instance.joint)
        )
    size = math.prod(len(f.scenarios) for f in instance.firms)
    if size > limit:
        raise TooLargeError(f"scenario product has {size} rows, limit {limit}")
    rows = []
    for combo in itertools.product(*(f.scenarios for f in instance.firms)):
        prob = math.prod((p for p, _ in combo), start=Fraction(1))
        rows.append(ScenarioRow(prob, tuple(v for _, v in combo)))
    return ScenarioTable(tuple(rows))


def expected_welfare(
    instance: MarketInstance,
    params: AuctionParams,
    table: ScenarioTable | None = None,
    scenario_limit: int = DEFAULT_SCENARIO_LIMIT,
) -> Fraction:
    """Probability-weighted welfare under truthful bidding."""
    if table is None:
        table = enumerate_scenarios(instance, scenario_limit)
    total = ZERO
    for row in table.rows:
        total += row.probability * run_auction(params, row.valuations, instance.cost).welfare
    return total


def max_total_demand(instance: MarketInstance) -> int:
    """Largest total quantity any scenario demands at price zero.

    Caps beyond this are welfare-equivalent to it when there is no price
    ceiling, so it is the default cap search bound.
    """
    table_like = (
        instance.joint
        if instance.joint is not None
        else itertools.product(*(f.scenarios for f in instance.firms))
    )
    best = 0
    if instance.joint is not None:
        for _, vs in instance.joint:
            best = max(best, sum(v.positive_units for v in vs))
    else:
        for combo in table_like:
            best = max(best, sum(v.positive_units for _, v in combo))
    return best


@dataclass(frozen=True)
class Candidate:
    cap: int | None
    floor: Fraction
    ceiling: Fraction | None
    expected_welfare: Fraction


@dataclass(frozen=True)
class OptResult:
    params: AuctionParams
    expected_welfare: Fraction
    searched: int
    table: tuple[Candidate, ...]


def _preference_key(welfare: Fraction, cap: int, floor: Fraction, ceiling: Fraction | None):
    # Maximize welfare; ties prefer smaller cap, then larger floor, then
    # larger ceiling (no ceiling counts as the largest).
    ceiling_rank = (1, ZERO) if ceiling is None else (0, ceiling)
    return (welfare, -cap, floor, ceiling_rank)


def _candidate_welfares(args):
    instance, params_list = args
    table = enumerate_scenarios(instance)
    return [expected_welfare(instance, p, table) for p in params_list]


def _evaluate_candidates(
    instance: MarketInstance,
    params_list: list[AuctionParams],
    table: ScenarioTable,
    threads: int,
) -> list[Fraction]:
    if threads <= 1 or len(params_list) < 4 * threads:
        return [expected_welfare(instance, p, table) for p in params_list]
    chunks = [params_list[i::threads] for i in range(threads)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(_candidate_welfares, [(instance, c) for c in chunks]))
    merged: list[Fraction] = [ZERO] * len(params_list)
    for t, chunk_result in enumerate(results):
        for j, w in enumerate(chunk_result):
            merged[t + j * threads] = w
    return merged


def optimize_cap_and_price(
    instance: MarketInstance,
    allow_ceiling: bool = True,
    cap_limit: int | None = None,
    scenario_limit: int = DEFAULT_SCENARIO_LIMIT,
    threads: int = 1,
) -> OptResult:
    """Exhaustive exact search for the welfare-best cap and price band.

    The price grid is welfare-exhaustive (see price_candidates), and a
    sentinel cap one above the search bound stands in for every larger cap,
    so the reported maximum is the true optimum over all parameter choices,
    not a discretization of it.
    """
    if cap_limit is None:
        cap_limit = max(1, max_total_demand(instance))
    grid = price_candidates(instance)
    table = enumerate_scenarios(instance, scenario_limit)
    caps = list(range(1, cap_limit + 2))  # cap_limit + 1 is the sentinel
    params_list = []
    for cap in caps:
        for floor in grid:
            params_list.append(AuctionParams(cap, floor, None, LOWEST_WINNING))
            if allow_ceiling:
                for ceiling in grid:
                    if ceiling > floor:
                        params_list.append(AuctionParams(cap, floor, ceiling, LOWEST_WINNING))
    welfares = _evaluate_candidates(instance, params_list, table, threads)

    rows = []
    best = None
    best_key = None
    best_w = None
    for p, w in zip(params_list, welfares):
        rows.append(Candidate(p.cap, p.floor, p.ceiling, w))
        key = _preference_key(w, p.cap, p.floor, p.ceiling)
        if best_key is None or key > best_key:
            best, best_key, best_w = p, key, w
    return OptResult(
        params=best,
        expected_welfare=best_w,
        searched=len(params_list),
        table=tuple(rows),
    )


def optimize_safe(
    instance: MarketInstance,
    cap_limit: int | None = None,
    scenario_limit: int = DEFAULT_SCENARIO_LIMIT,
    threads: int = 1,
) -> OptResult:
    """Best safe-price auction: argmax over caps with floor pinned to the
    average cost of the cap."""
    if cap_limit is None:
        cap_limit = max(1, max_total_demand(instance))
    table = enumerate_scenarios(instance, scenario_limit)
    params_list = [make_safe_auction(c, instance.cost) for c in range(1, cap_limit + 1)]
    welfares = _evaluate_candidates(instance, params_list, table, threads)
    rows = []
    best = None
    best_w = None
    for p, w in zip(params_list, welfares):
        rows.append(Candidate(p.cap, p.floor, p.ceiling, w))
        if best_w is None or w > best_w:  # ties keep the smaller cap
            best, best_w = p, w
    return OptResult(
        params=best, expected_welfare=best_w, searched=len(params_list), table=tuple(rows)
    )


def safe_welfare_table(
    instance: MarketInstance,
    cap_limit: int | None = None,
    scenario_limit: int = DEFAULT_SCENARIO_LIMIT,
) -> dict[int, Fraction]:
    """Expected welfare of the safe-price auction for every cap in range.

    Includes the cap-0 convention (sell nothing, welfare 0) used when a
    bound halves an odd cap.
    """
    if cap_limit is None:
        cap_limit = max(1, max_total_demand(instance))
    table = enumerate_scenarios(instance, scenario_limit)
    out = {0: ZERO}
    for cap in range(1, cap_limit + 1):
        out[cap] = expected_welfare(
            instance, make_safe_auction(cap, instance.cost), table
        )
    return out


def sell_out_probability(
    instance: MarketInstance,
    params: AuctionParams,
    table: ScenarioTable | None = None,
    scenario_limit: int = DEFAULT_SCENARIO_LIMIT,
) -> Fraction:
    """Probability that demand at the floor reaches the cap."""
    if params.cap is None:
        raise ValidationError("sell-out probability needs a bounded cap")
    if table is None:
        table = enumerate_scenarios(instance, scenario_limit)
    total = ZERO
    for row in table.rows:
        if sum(v.demand(params.floor) for v in row.valuations) >= params.cap:
            total += row.probability
    return total


@lru_cache(maxsize=None)
def one_minus_inv_e(digits: int = 50) -> Fraction:
    """Rational over-approximation of 1 - 1/e, accurate to `digits` decimals.

    Built from the exact factorial series for e with a rigorous remainder
    bound, then rounded up, so the returned threshold is strictly above the
    irrational value (comparisons never accept a quantity the exact
    threshold would reject).
    """
    terms = 60  # 61! is far beyond 10**50, so the remainder is negligible
    e_low = sum((Fraction(1, math.factorial(k)) for k in range(terms + 1)), ZERO)
    e_high = e_low + Fraction(2, math.factorial(terms + 1))
    upper = 1 - Fraction(1, 1) / e_high  # strict upper bound on 1 - 1/e
    scale = 10**digits
    return Fraction(math.ceil(upper * scale), scale)


def demand_quantile_cap(
    instance: MarketInstance,
    floor: Fraction,
    threshold: Fraction | None = None,
    scenario_limit: int = DEFAULT_SCENARIO_LIMIT,
) -> int:
    """Largest cap demanded with probability at least `threshold`.

    Demand is measured at the given floor; the default threshold is the
    1 - 1/e over-approximation. Returns 0 when even one license is too
    rarely demanded.
    """
    floor = rat(floor)
    if threshold is None:
        threshold = one_minus_inv_e()
    else:
        threshold = rat(threshold)
        if not 0 < threshold < 1:
            raise ValidationError(f"threshold must be in (0,1), got {threshold}")
    table = enumerate_scenarios(instance, scenario_limit)
    demands = sorted(
        (sum(v.demand(floor) for v in row.valuations), row.probability)
        for row in table.rows
    )
    # Pr[d >= c] scanning demands from the top down.
    best = 0
    tail = ZERO
    for demand, prob in reversed(demands):
        tail += prob
        if tail >= threshold:
            best = demand
            # Larger demands had tail < threshold; this is the largest c
            # with Pr[d >= c] >= threshold.
            break
    return best


def single_buyer_expected(
    instance: MarketInstance,
    scenario_limit: int = DEFAULT_SCENARIO_LIMIT,
) -> Fraction:
    """Expected welfare of the truthful sell-to-one-firm mechanism."""
    table = enumerate_scenarios(instance, scenario_limit)
    total = ZERO
    for row in table.rows:
        total += row.probability * single_buyer_mechanism(row.valuations, instance.cost).welfare
    return total


def first_best_expected(
    instance: MarketInstance,
    scenario_limit: int = DEFAULT_SCENARIO_LIMIT,
) -> Fraction:
    """Expected welfare of the per-realization unconstrained optimum.

    Greedy over the pooled marginals: by concavity/convexity the welfare
    increments are non-increasing, so sum them while positive.
    """
    table = enumerate_scenarios(instance, scenario_limit)
    total = ZERO
    for row in table.rows:
        pool = sorted(
            (v for mv in row.valuations for v in mv.marginals), reverse=True
        )
        best = ZERO
        running = ZERO
        for j, value in enumerate(pool, start=1):
            step = value - (instance.cost.cost(j) - instance.cost.cost(j - 1))
            if step <= 0:
                break
            running += step
            best = running
        total += row.probability * best
    return total
