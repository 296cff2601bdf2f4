"""Structured pass/fail records and their serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np


@dataclass
class Check:
    """One gated comparison ``value <= threshold`` or ``value >= threshold``."""

    name: str
    value: float
    threshold: float
    relation: str = ">="

    def __post_init__(self):
        if self.relation not in ("<=", ">="):
            raise ValueError("relation must be '<=' or '>='")
        self.value = float(self.value)
        self.threshold = float(self.threshold)

    @property
    def ok(self) -> bool:
        if math.isnan(self.value):
            return False
        if self.relation == "<=":
            return self.value <= self.threshold
        return self.value >= self.threshold


@dataclass
class VerificationReport:
    """Outcome of one statistical acceptance check.

    The pass flag is derived from ``checks`` only, so it can be recomputed
    from the serialized numbers.  ``statistics`` and ``standard_errors`` hold
    supporting values that are not gated.
    """

    name: str
    checks: List[Check] = field(default_factory=list)
    statistics: Dict[str, Any] = field(default_factory=dict)
    standard_errors: Dict[str, Any] = field(default_factory=dict)
    replicas: int = 0
    seed: Optional[int] = None
    notes: List[str] = field(default_factory=list)
    error: Optional[str] = None
    wall_clock: float = 0.0

    def gate(self, name, value, threshold, relation=">=") -> Check:
        c = Check(name, value, threshold, relation)
        self.checks.append(c)
        return c

    @property
    def passed(self) -> bool:
        return self.error is None and bool(self.checks) and all(c.ok for c in self.checks)

    @property
    def thresholds(self) -> Dict[str, float]:
        return {c.name: c.threshold for c in self.checks}

    def failed_checks(self) -> List[str]:
        return [c.name for c in self.checks if not c.ok]

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = []
        for c in self.checks:
            mark = "ok" if c.ok else "FAILED"
            parts.append(f"{c.name}={c.value:.4g} {c.relation} {c.threshold:.4g} [{mark}]")
        if self.error:
            parts.append(f"error: {self.error}")
        return f"{status} {self.name}: " + "; ".join(parts)

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        d = {
            "name": self.name,
            "passed": self.passed,
            "replicas": int(self.replicas),
            "seed": self.seed,
            "checks": [
                {"name": c.name, "value": c.value, "threshold": c.threshold,
                 "relation": c.relation, "ok": c.ok}
                for c in self.checks
            ],
            "statistics": _plain(self.statistics),
            "standard_errors": _plain(self.standard_errors),
            "notes": list(self.notes),
            "error": self.error,
        }
        if include_timing:
            d["wall_clock"] = self.wall_clock
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "VerificationReport":
        r = cls(d["name"], replicas=d.get("replicas", 0), seed=d.get("seed"),
                notes=list(d.get("notes", [])), error=d.get("error"),
                statistics=d.get("statistics", {}),
                standard_errors=d.get("standard_errors", {}),
                wall_clock=d.get("wall_clock", 0.0))
        for c in d.get("checks", []):
            r.gate(c["name"], c["value"], c["threshold"], c["relation"])
        return r


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits."""
    obj = _plain(obj)
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_reports(path, reports: List[VerificationReport], meta: Optional[dict] = None) -> None:
    body = {
        "meta": meta or {},
        "all_passed": all(r.passed for r in reports),
        "family": family_summary(reports),
        "reports": [r.to_dict() for r in reports],
    }
    with open(path, "w") as fh:
        fh.write(dumps(body) + "\n")


def family_summary(reports: List[VerificationReport]) -> Dict[str, Any]:
    """Counts of gated checks plus a Bonferroni view of the p-value checks."""
    pvals = [c.value for r in reports for c in r.checks
             if c.relation == ">=" and c.name.endswith("p_value")]
    n_checks = sum(len(r.checks) for r in reports)
    out = {
        "reports": len(reports),
        "reports_passed": sum(r.passed for r in reports),
        "checks": n_checks,
        "checks_passed": sum(c.ok for r in reports for c in r.checks),
        "p_value_checks": len(pvals),
    }
    if pvals:
        m = min(pvals)
        out["min_p_value"] = m
        out["bonferroni_min_p"] = min(1.0, m * len(pvals))
    return out
