"""Instance files and report emission.

Instance files are human-editable JSON with every number written as an
exact rational string ("p/q" or an integer literal). Reports are CSV with
each rational emitted twice: exact "p/q" (lossless, reparses to the same
Fraction) and a 12-place decimal for reading.
"""

from __future__ import annotations

import csv
import json
from fractions import Fraction
from pathlib import Path

from .model import (
    ERROR_BEYOND,
    REPEAT_LAST,
    CostCurve,
    FirmDistribution,
    MarginalCostTable,
    MarginalVector,
    MarketInstance,
    QuadraticCost,
    ValidationError,
    rat,
    require_valid,
)

DECIMAL_PLACES = 12


def format_rational(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def format_decimal(value: Fraction, places: int = DECIMAL_PLACES) -> str:
    """Round-half-up decimal rendering; display only, never compared."""
    sign = "-" if value < 0 else ""
    value = abs(value)
    scale = 10**places
    scaled = (value.numerator * scale * 2 + value.denominator) // (2 * value.denominator)
    whole, frac = divmod(scaled, scale)
    return f"{sign}{whole}.{str(frac).zfill(places)}"


def _cost_to_obj(cost: CostCurve) -> dict:
    if isinstance(cost, QuadraticCost):
        return {"kind": "quadratic", "a": format_rational(cost.a)}
    extension = "repeat-last" if cost.extension == REPEAT_LAST else "error"
    return {
        "kind": "marginals",
        "values": [format_rational(v) for v in cost.marginals],
        "extension": extension,
    }


def _cost_from_obj(obj) -> CostCurve:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError("cost: expected an object with a 'kind' field")
    kind = obj["kind"]
    if kind == "quadratic":
        return QuadraticCost(rat(obj.get("a", "1")))
    if kind == "marginals":
        extension = obj.get("extension", "repeat-last")
        if extension not in ("repeat-last", "error"):
            raise ValidationError(f"cost.extension: unknown policy {extension!r}")
        return MarginalCostTable(
            tuple(rat(v) for v in obj.get("values", [])),
            REPEAT_LAST if extension == "repeat-last" else ERROR_BEYOND,
        )
    raise ValidationError(f"cost.kind: expected 'quadratic' or 'marginals', got {kind!r}")


def instance_to_obj(instance: MarketInstance) -> dict:
    obj = {"label": instance.label, "cost": _cost_to_obj(instance.cost)}
    if instance.joint is not None:
        obj["joint_scenarios"] = [
            {
                "prob": format_rational(p),
                "marginals": [[format_rational(v) for v in mv.marginals] for mv in vs],
            }
            for p, vs in instance.joint
        ]
    else:
        obj["firms"] = [
            {
                "scenarios": [
                    {
                        "prob": format_rational(p),
                        "marginals": [format_rational(v) for v in mv.marginals],
                    }
                    for p, mv in firm.scenarios
                ]
            }
            for firm in instance.firms
        ]
    return obj


def instance_from_obj(obj) -> MarketInstance:
    if not isinstance(obj, dict):
        raise ValidationError("instance: expected a JSON object")
    label = obj.get("label", "")
    cost = _cost_from_obj(obj.get("cost", {}))
    joint = None
    firms: tuple[FirmDistribution, ...] = ()
    if "joint_scenarios" in obj:
        rows = []
        for r, row in enumerate(obj["joint_scenarios"]):
            try:
                prob = rat(row["prob"])
                vs = tuple(
                    MarginalVector(tuple(rat(v) for v in marginals))
                    for marginals in row["marginals"]
                )
            except (KeyError, TypeError) as exc:
                raise ValidationError(f"joint_scenarios[{r}]: {exc}") from None
            rows.append((prob, vs))
        joint = tuple(rows)
    elif "firms" in obj:
        parsed = []
        for i, firm in enumerate(obj["firms"]):
            try:
                scenarios = tuple(
                    (rat(s["prob"]), MarginalVector(tuple(rat(v) for v in s["marginals"])))
                    for s in firm["scenarios"]
                )
            except (KeyError, TypeError) as exc:
                raise ValidationError(f"firms[{i}]: {exc}") from None
            parsed.append(FirmDistribution(scenarios))
        firms = tuple(parsed)
    else:
        raise ValidationError("instance: needs either 'firms' or 'joint_scenarios'")
    return MarketInstance(firms=firms, cost=cost, label=label, joint=joint)


def dumps_instance(instance: MarketInstance) -> str:
    return json.dumps(instance_to_obj(instance), indent=2) + "\n"


def loads_instance(text: str) -> MarketInstance:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"instance file is not valid JSON: {exc}") from None
    return instance_from_obj(obj)


def save_instance(instance: MarketInstance, path: str | Path) -> None:
    Path(path).write_text(dumps_instance(instance), encoding="utf-8")


def load_instance(path: str | Path, check: bool = True) -> MarketInstance:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read instance file {path}: {exc}") from None
    instance = loads_instance(text)
    if check:
        require_valid(instance)
    return instance


def rational_columns(name: str, value: Fraction | None) -> list[tuple[str, str]]:
    """Column pair for one rational: exact and decimal rendering."""
    if value is None:
        return [(name, "inf"), (f"{name}_dec", "inf")]
    return [(name, format_rational(value)), (f"{name}_dec", format_decimal(value))]


def write_csv(path: str | Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
