"""Inequality records and their JSON rendering."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

FLOAT_SLACK = 1e-9
SCHEMA_VERSION = 1

PASS, FAIL, SKIP, CORPUS_ERROR = "pass", "fail", "skip", "corpus-error"


def is_exact(*values) -> bool:
    return all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in values)


def render(value):
    """JSON form of a number: exact values keep a ``"p/q"`` string."""
    if value is None:
        return None
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, Fraction)):
        value = Fraction(value)
        return {"exact": f"{value.numerator}/{value.denominator}", "value": float(value)}
    if isinstance(value, float) and value != value:
        return {"value": "nan"}
    if isinstance(value, float) and value in (float("inf"), float("-inf")):
        return {"value": "inf" if value > 0 else "-inf"}
    return {"value": float(value)}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if hasattr(obj, "item"):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def float_pass(lhs, rhs) -> bool:
    return float(rhs) - float(lhs) >= -FLOAT_SLACK * max(1.0, abs(float(rhs)))


@dataclass
class InequalityReport:
    """One checked (or skipped) inequality ``lhs <= rhs``.

    ``exact_pass`` overrides the numeric comparison when the decision was
    made exactly on an equivalent form (e.g. after squaring both sides of a
    bound involving a square root); ``lhs``/``rhs`` are then the natural
    values, possibly floats.
    """

    statement: str
    chain_id: str = ""
    lhs: object = None
    rhs: object = None
    status: str = PASS
    mode: str = "exact"
    hypotheses: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    note: str = ""
    external: bool = False

    @property
    def slack(self):
        if self.lhs is None or self.rhs is None:
            return None
        if is_exact(self.lhs, self.rhs):
            return Fraction(self.rhs) - Fraction(self.lhs)
        return float(self.rhs) - float(self.lhs)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_json_dict(self) -> dict:
        return {
            "statement": self.statement,
            "chain": self.chain_id,
            "status": self.status,
            "mode": self.mode,
            "lhs": render(self.lhs),
            "rhs": render(self.rhs),
            "slack": render(self.slack),
            "hypotheses": _plain(self.hypotheses),
            "params": _plain(self.params),
            "note": self.note,
            "external": self.external,
        }


def inequality(statement: str, lhs, rhs, *, exact_pass: bool | None = None, **kw) -> InequalityReport:
    """Decide ``lhs <= rhs`` exactly when possible, else with float slack."""
    if exact_pass is not None:
        ok, mode = exact_pass, "exact"
    elif is_exact(lhs, rhs):
        ok, mode = Fraction(lhs) <= Fraction(rhs), "exact"
    else:
        ok, mode = float_pass(lhs, rhs), "float"
    kw.setdefault("mode", mode)
    return InequalityReport(statement, lhs=lhs, rhs=rhs, status=PASS if ok else FAIL, **kw)


def skipped(statement: str, reason: str, **kw) -> InequalityReport:
    return InequalityReport(statement, status=SKIP, note=reason, **kw)


def tightest(reports: list[InequalityReport]) -> InequalityReport:
    """The binding instance: any failure first, else the largest lhs/rhs ratio."""
    failures = [r for r in reports if r.status == FAIL]
    pool = failures or reports

    def key(r):
        lhs, rhs = float(r.lhs), float(r.rhs)
        if rhs > 0:
            return lhs / rhs
        if r.status == FAIL:
            return float("inf")
        return float("-inf")

    return max(pool, key=key)
