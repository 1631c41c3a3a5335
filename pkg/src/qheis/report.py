"""Check records, verification reports, convergence tables.

A report is a flat list of per-identity records plus a list of refinement
trends.  Overall PASS requires every record under its tolerance and every
trend monotone over the final two levels.  Serialized output is sorted and
free of environment noise, so two runs with the same configuration and
seed produce identical bodies up to the runtime fields.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, asdict

SCHEMA = "qheis-report/1"

CSV_HEADER = ("suite", "identity", "lambda", "level", "residual")


@dataclass(frozen=True)
class CheckRecord:
    """One measured identity at one deformation value.

    ``anchor`` states the equation being checked in words, so a failing
    record names the violated law on its own.  ``level`` is the index into
    the refinement ladder the residual was measured at.
    """

    suite: str
    identity: str
    anchor: str
    lam: float
    residual: float
    tolerance: float
    passed: bool
    level: int = 0
    runtime: float = 0.0


def make_record(
    suite: str,
    identity: str,
    anchor: str,
    lam: float,
    residual: float,
    tolerance: float,
    level: int = 0,
    runtime: float = 0.0,
) -> CheckRecord:
    ok = math.isfinite(residual) and residual <= tolerance
    return CheckRecord(
        suite=suite,
        identity=identity,
        anchor=anchor,
        lam=float(lam),
        residual=float(residual),
        tolerance=float(tolerance),
        passed=bool(ok),
        level=int(level),
        runtime=float(runtime),
    )


@dataclass(frozen=True)
class TrendRecord:
    """Residuals of one identity across a refinement ladder.

    ``strict`` demands a real decrease over the final two levels; otherwise
    non-increase is enough (grid-free checks repeat the same value).
    """

    suite: str
    identity: str
    lam: float
    levels: tuple[int, ...]
    residuals: tuple[float, ...]
    strict: bool = True

    @property
    def monotone_tail(self) -> bool:
        if len(self.residuals) < 2:
            return True
        prev, last = self.residuals[-2], self.residuals[-1]
        if not (math.isfinite(prev) and math.isfinite(last)):
            return False
        if self.strict:
            return last < prev
        return last <= prev * (1.0 + 1e-12) + 1e-300


@dataclass
class VerificationReport:
    config: dict
    records: list[CheckRecord] = field(default_factory=list)
    trends: list[TrendRecord] = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)
    schema: str = SCHEMA

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records) and all(
            t.monotone_tail for t in self.trends
        )

    def summary(self) -> dict:
        return {
            "checks": len(self.records),
            "failed": sum(not r.passed for r in self.records),
            "trends": len(self.trends),
            "non_monotone": sum(not t.monotone_tail for t in self.trends),
            "skipped_suites": list(self.skipped),
            "pass": self.passed,
        }

    def body(self, include_runtime: bool = True) -> dict:
        records = []
        for r in sort_records(self.records):
            d = asdict(r)
            if not include_runtime:
                d.pop("runtime")
            records.append(d)
        trends = [
            dict(asdict(t), monotone_tail=t.monotone_tail)
            for t in sort_trends(self.trends)
        ]
        return {
            "schema": self.schema,
            "config": self.config,
            "summary": self.summary(),
            "records": records,
            "trends": trends,
            "tables": self.tables,
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.body(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def sort_records(records) -> list[CheckRecord]:
    return sorted(records, key=lambda r: (r.suite, r.identity, r.lam, r.level))


def sort_trends(trends) -> list[TrendRecord]:
    return sorted(trends, key=lambda t: (t.suite, t.identity, t.lam))


def trend_csv_rows(trends) -> list[tuple]:
    rows = []
    for t in sort_trends(trends):
        for level, residual in zip(t.levels, t.residuals):
            rows.append((t.suite, t.identity, t.lam, level, residual))
    return rows


def write_trend_csv(trends, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        writer.writerows(trend_csv_rows(trends))


def trend_csv_text(trends) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_HEADER)
    writer.writerows(trend_csv_rows(trends))
    return buf.getvalue()
