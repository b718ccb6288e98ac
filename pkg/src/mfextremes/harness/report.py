"""Check records, the experiment report, and its JSON / text renderings."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Union

__all__ = ["CheckRecord", "Report", "load_report", "render_report"]

_WALL_CLOCK = ("created_at", "elapsed_seconds")


@dataclass(frozen=True)
class CheckRecord:
    name: str
    statistic: float
    threshold: float
    passed: bool
    sample_sizes: dict
    mandatory: bool = True
    comparison: str = "<"
    detail: dict = field(default_factory=dict)


def _clean(obj):
    # JSON has no inf/nan; encode them as strings so the file stays valid
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalar
        return _clean(obj.item())
    return obj


def _unclean(obj):
    if obj in ("nan", "inf", "-inf"):
        return float(obj)
    if isinstance(obj, dict):
        return {k: _unclean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_unclean(v) for v in obj]
    return obj


@dataclass
class Report:
    name: str
    checks: list
    summary: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "pass" if all(c.passed for c in self.checks if c.mandatory) else "fail"

    def check(self, name: str) -> CheckRecord:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return _clean(
            {
                "name": self.name,
                "verdict": self.verdict,
                "checks": [asdict(c) for c in self.checks],
                "summary": self.summary,
                "provenance": self.provenance,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def body_json(self) -> str:
        """JSON without wall-clock fields, for determinism comparisons."""
        d = self.to_dict()
        d["provenance"] = {k: v for k, v in d["provenance"].items() if k not in _WALL_CLOCK}
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json())


def load_report(path: Union[str, Path]) -> Report:
    d = _unclean(json.loads(Path(path).read_text()))
    return Report(
        name=d["name"],
        checks=[CheckRecord(**c) for c in d["checks"]],
        summary=d.get("summary", {}),
        provenance=d.get("provenance", {}),
    )


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def render_report(report: Report) -> str:
    rows = [("check", "statistic", "cmp", "threshold", "result", "n")]
    for c in report.checks:
        n = ",".join(f"{k}={v}" for k, v in c.sample_sizes.items())
        result = ("PASS" if c.passed else "FAIL") + ("" if c.mandatory else " (info)")
        rows.append((c.name, _fmt(c.statistic), c.comparison, _fmt(c.threshold), result, n))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = [f"experiment: {report.name}   verdict: {report.verdict.upper()}"]
    for key in sorted(report.summary):
        lines.append(f"  {key}: {report.summary[key]}")
    lines.append("")
    for j, r in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
