"""Run reports and their on-disk formats.

CSV and JSON files are written atomically (temporary file in the target
directory, then ``os.replace``). Floats are printed with 17 significant
digits so that a rerun with the same inputs reproduces the bytes exactly.
"""
import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import List, Optional

FLOAT_FORMAT = "%.17g"


@dataclass
class Check:
    """One measured quantity compared against a threshold.

    ``comparison`` is one of ``<=``, ``>=``, ``<``, ``>``, ``==`` or
    ``abs<=`` (|value - target| <= tolerance, with ``threshold`` holding
    the tolerance and ``target`` the reference).
    """

    name: str
    value: float
    threshold: float
    comparison: str = "<="
    target: Optional[float] = None
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = _compare(self.value, self.threshold, self.comparison, self.target)


def _compare(value, threshold, comparison, target):
    v = float(value)
    if math.isnan(v):
        return False
    if comparison == "<=":
        return v <= threshold
    if comparison == ">=":
        return v >= threshold
    if comparison == "<":
        return v < threshold
    if comparison == ">":
        return v > threshold
    if comparison == "==":
        return v == threshold
    if comparison == "abs<=":
        return abs(v - target) <= threshold
    raise ValueError(f"unknown comparison {comparison!r}")


@dataclass
class RunReport:
    scenario_id: str
    wall_time: float = 0.0
    checks: List[Check] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def as_dict(self):
        return {
            "scenario_id": self.scenario_id,
            "passed": self.passed,
            "wall_time": self.wall_time,
            "checks": [
                {
                    "name": c.name,
                    "value": c.value,
                    "comparison": c.comparison,
                    "threshold": c.threshold,
                    "target": c.target,
                    "passed": c.passed,
                }
                for c in self.checks
            ],
            "outputs": list(self.outputs),
            "warnings": list(self.warnings),
        }

    def table(self):
        width = max([len(c.name) for c in self.checks] + [5])
        lines = [f"{'check':<{width}}  {'value':>14}  {'rule':>20}  result"]
        for c in self.checks:
            rule = (f"|x-{c.target:g}|<={c.threshold:.3g}" if c.comparison == "abs<="
                    else f"{c.comparison} {c.threshold:.3g}")
            lines.append(f"{c.name:<{width}}  {float(c.value):>14.6g}  {rule:>20}  "
                         f"{'PASS' if c.passed else 'FAIL'}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'} "
                     f"({sum(c.passed for c in self.checks)}/{len(self.checks)})")
        return "\n".join(lines)


def format_float(x):
    return FLOAT_FORMAT % float(x)


def _to_json(obj, indent=2, level=0):
    """JSON text with insertion-ordered keys and %.17g floats (NaN/inf -> null)."""
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_to_json(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _to_json(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float) or hasattr(obj, "__float__"):
        x = float(obj)
        return format_float(x) if math.isfinite(x) else "null"
    return json.dumps(str(obj))


def report_json(report):
    return _to_json(report.as_dict()) + "\n"


def csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_float(v) for v in row])
    return buf.getvalue()


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary sibling and a rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path
