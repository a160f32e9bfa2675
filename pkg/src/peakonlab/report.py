"""Check records and run reports."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = ["Check", "RunReport"]


@dataclass(frozen=True)
class Check:
    """One measured quantity compared against an expectation.

    ``relation`` is ``"<="`` (measured at most ``expected + tolerance``),
    ``">="`` (at least ``expected - tolerance``) or ``"=="`` (within
    ``tolerance`` of ``expected``).
    """

    name: str
    measured: float
    expected: float
    tolerance: float
    relation: str = "=="
    note: str = ""

    def __post_init__(self):
        if self.relation not in ("<=", ">=", "=="):
            raise ValueError(f"unknown relation {self.relation!r}")
        if not (isinstance(self.tolerance, (int, float)) and self.tolerance >= 0):
            raise ValueError("every check needs an explicit nonnegative tolerance")

    @property
    def passed(self) -> bool:
        m = float(self.measured)
        if not math.isfinite(m):
            return False
        if self.relation == "<=":
            return m <= self.expected + self.tolerance
        if self.relation == ">=":
            return m >= self.expected - self.tolerance
        return abs(m - self.expected) <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        rel = {"==": "==", "<=": "<=", ">=": ">="}[self.relation]
        return f"{status}  {self.name}: {self.measured:.6g} {rel} {self.expected:.6g} (tol {self.tolerance:.3g})"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "measured": float(self.measured),
            "expected": float(self.expected),
            "relation": self.relation,
            "tolerance": float(self.tolerance),
            "passed": self.passed,
            "note": self.note,
        }


@dataclass
class RunReport:
    """Checks of one run with the configuration that produced them.

    Wall-clock timings are kept apart from the serialized report so that
    identical runs produce identical files.
    """

    scenario: str
    config: dict
    checks: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, *checks: Check) -> None:
        self.checks.extend(checks)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "passed": self.passed,
            "config": self.config,
            "checks": [c.to_dict() for c in self.checks],
            "metrics": self.metrics,
            "artifacts": list(self.artifacts),
        }

    def rows(self):
        for c in self.checks:
            yield (c.name, c.measured, c.relation, c.expected, c.tolerance, "pass" if c.passed else "fail", c.note)

    def to_csv(self, path) -> None:
        from .export import write_csv

        write_csv(path, ["name", "measured", "relation", "expected", "tolerance", "status", "note"], self.rows())

    def to_svg(self, path) -> None:
        from .export import checks_svg

        checks_svg(path, self.checks, title=f"{self.scenario}: {'pass' if self.passed else 'FAIL'}")

    def summary(self) -> str:
        lines = [c.line() for c in self.checks]
        lines.append(f"{self.scenario}: {'all checks passed' if self.passed else 'FAILED'}")
        return "\n".join(lines)
