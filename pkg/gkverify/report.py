"""Check records, the run report and its human/machine renderings."""
import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import __version__

REPORT_VERSION = 1

PASS = "pass"
FAIL = "fail"
INFO = "info"
PREMISES_FAIL = "premises-fail"
GATE_FAIL = "gate-fail"


@dataclass
class Residual:
    """One named check: a max-abs residual (or a min bound) against a tolerance."""

    name: str
    label: str
    value: Optional[float]
    tolerance: float
    informational: bool = False
    lower_bound: bool = False  # pass iff value >= tolerance
    status: Optional[str] = None  # PREMISES_FAIL / GATE_FAIL override
    notes: List[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        if self.status:
            return self.status
        if self.informational:
            return INFO
        if self.value is None:
            return FAIL
        ok = self.value >= self.tolerance if self.lower_bound else self.value <= self.tolerance
        return PASS if ok else FAIL

    @property
    def counts(self) -> bool:
        """Whether the record takes part in the overall verdict."""
        return not self.informational and self.status is None

    @property
    def passed(self) -> bool:
        return self.verdict in (PASS, INFO)


@dataclass
class CheckRecord:
    residual: Residual
    sample_box: Tuple[float, float]
    point_count: int
    seed: int

    def as_dict(self) -> Dict:
        r = self.residual
        return {
            "name": r.name,
            "equation": r.label,
            "sample_box": [float(self.sample_box[0]), float(self.sample_box[1])],
            "point_count": self.point_count,
            "seed": self.seed,
            "max_residual": None if r.value is None else float(r.value),
            "tolerance": float(r.tolerance),
            "comparison": ">=" if r.lower_bound else "<=",
            "verdict": r.verdict,
            "informational": r.informational or r.status is not None,
            "notes": list(r.notes),
        }


@dataclass
class CheckReport:
    command: str
    inputs: Dict[str, str] = field(default_factory=dict)  # path -> sha256
    records: List[CheckRecord] = field(default_factory=list)
    tool_version: str = __version__

    def add(self, residuals: Sequence[Residual], sample_box: Tuple[float, float], point_count: int, seed: int) -> None:
        for residual in residuals:
            self.records.append(CheckRecord(residual, sample_box, point_count, seed))

    def add_input(self, path: str, data: bytes) -> None:
        self.inputs[path] = hashlib.sha256(data).hexdigest()

    @property
    def passed(self) -> bool:
        return all(record.residual.passed for record in self.records if record.residual.counts)

    def as_dict(self) -> Dict:
        return {
            "report_version": REPORT_VERSION,
            "tool_version": self.tool_version,
            "command": self.command,
            "inputs": [{"path": path, "sha256": digest} for path, digest in sorted(self.inputs.items())],
            "records": [record.as_dict() for record in self.records],
            "verdict": PASS if self.passed else FAIL,
        }


_MARKS = {PASS: "✅", FAIL: "❌", INFO: "⚠️ ", PREMISES_FAIL: "⏭ ", GATE_FAIL: "⏭ "}


def _format_value(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.3e}"


class Reporter:
    def __init__(self):
        self.logger = logging.getLogger(__name__)

    def render_json(self, report: CheckReport) -> str:
        return json.dumps(report.as_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    def render_human(self, report: CheckReport) -> str:
        lines = [f"gk-verify {report.tool_version} :: {report.command}"]
        for path, digest in sorted(report.inputs.items()):
            lines.append(f"  input {path} (sha256 {digest[:16]}…)")
        if report.records:
            first = report.records[0]
            lines.append(
                f"  sample box [{first.sample_box[0]:g}, {first.sample_box[1]:g}]^N, "
                f"{first.point_count} points, seed {first.seed}"
            )
        lines.append("-" * 78)
        lines.append(f"   {'check':<34} {'equation':<16} {'residual':>10} {'tol':>10}")
        lines.append("-" * 78)
        for record in report.records:
            r = record.residual
            cmp = ">=" if r.lower_bound else "<="
            lines.append(
                f"{_MARKS[r.verdict]} {r.name:<34} {r.label:<16} {_format_value(r.value):>10} "
                f"{cmp}{r.tolerance:.0e}"
            )
            for note in r.notes:
                lines.append(f"     · {note}")
        lines.append("-" * 78)
        verdict = "✅ PASS" if report.passed else "❌ FAIL"
        lines.append(f"{verdict} ({len(report.records)} checks)")
        return "\n".join(lines) + "\n"

    def emit_report(self, report: CheckReport, fmt: str = "human") -> str:
        if fmt == "json":
            return self.render_json(report)
        if fmt == "human":
            return self.render_human(report)
        raise ValueError(f"unknown report format {fmt!r}")

    def write_json(self, report: CheckReport, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.render_json(report))
        self.logger.info(f"Machine report written to {path}")

    def log_summary(self, report: CheckReport) -> None:
        failed = [r.residual for r in report.records if r.residual.counts and not r.residual.passed]
        skipped = [r.residual for r in report.records if r.residual.status]
        self.logger.info(
            f"Check summary: {len(report.records)} records, "
            f"{len(failed)} failed, {len(skipped)} gated"
        )
        for residual in failed:
            self.logger.warning(
                f"Check failed: {residual.name} {residual.label} - residual {_format_value(residual.value)}"
            )
