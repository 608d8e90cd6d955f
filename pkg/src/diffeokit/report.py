"""Verification reports: pass/fail plus the residual evidence behind it."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

# default tolerances
TOL_EXACT = 1e-9
TOL_FD = 1e-6


def _plain(value: Any) -> Any:
    """Convert numpy scalars/arrays (recursively) to JSON-ready Python values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


@dataclass
class VerificationReport:
    """Outcome of one sampled or exhaustive check.

    ``passed`` is always ``max_residual <= tolerance``.  Composite reports
    (see :meth:`combine`) keep their parts in ``checks`` and take their
    residual and tolerance from the worst part, measured by residual/tolerance.
    """

    name: str
    max_residual: float
    tolerance: float
    samples_used: int = 0
    witness: Any = None
    details: dict = field(default_factory=dict)
    checks: list["VerificationReport"] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.max_residual <= self.tolerance)

    def __bool__(self) -> bool:
        return self.passed

    @classmethod
    def from_residuals(cls, name, residuals, tolerance, points=None, **details):
        """Build a report from an array of per-sample residuals."""
        res = np.asarray(residuals, dtype=float).reshape(-1)
        witness = None
        if res.size == 0:
            worst = 0.0
        else:
            bad = ~np.isfinite(res)
            k = int(np.argmax(bad)) if bad.any() else int(np.argmax(res))
            worst = math.inf if bad.any() else float(res[k]) + 0.0
            if points is not None and (worst > tolerance):
                witness = _plain(np.asarray(points)[k])
        return cls(name, worst, float(tolerance), int(res.size), witness, dict(details))

    @classmethod
    def from_failures(cls, name, failures, checked, **details):
        """Exhaustive check: residual is the failure count, tolerance 0."""
        failures = list(failures)
        witness = _plain(failures[0]) if failures else None
        return cls(name, float(len(failures)), 0.0, int(checked), witness, dict(details))

    @classmethod
    def combine(cls, name, reports, **details):
        reports = list(reports)
        if not reports:
            return cls(name, 0.0, 0.0, 0, None, dict(details))

        def ratio(r):
            if r.max_residual <= r.tolerance:
                return r.max_residual / r.tolerance if r.tolerance > 0 else 0.0
            return math.inf if r.tolerance == 0 else r.max_residual / r.tolerance

        worst = max(reports, key=lambda r: (not r.passed, ratio(r)))
        return cls(
            name,
            worst.max_residual,
            worst.tolerance,
            sum(r.samples_used for r in reports),
            worst.witness if not worst.passed else None,
            dict(details),
            reports,
        )

    def failing(self) -> list[str]:
        """Names of the failing leaves."""
        if not self.checks:
            return [] if self.passed else [self.name]
        out = []
        for c in self.checks:
            out.extend(c.failing())
        return out

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "pass": self.passed,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "samples_used": self.samples_used,
            "witness": self.witness,
            "details": self.details,
        }
        if self.checks:
            d["checks"] = [c.to_dict() for c in self.checks]
        return _plain(d)

    def to_json(self, **kw) -> str:
        kw.setdefault("indent", 2)
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    def to_text(self, indent: int = 0) -> str:
        pad = "  " * indent
        status = "PASS" if self.passed else "FAIL"
        line = (f"{pad}[{status}] {self.name}: max_residual={self.max_residual:.3e}"
                f" tol={self.tolerance:.1e} samples={self.samples_used}")
        if self.witness is not None and not self.passed:
            line += f" witness={self.witness}"
        lines = [line]
        for c in self.checks:
            lines.append(c.to_text(indent + 1))
        return "\n".join(lines)

    def __str__(self) -> str:
        return self.to_text()
