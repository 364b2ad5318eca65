"""Campaign report documents.

A report is a versioned, self-contained JSON document; every table a
campaign produces (per-function carve counts, lift effectiveness,
unit/system speedup, coverage over time) is derivable from it without
re-running anything.  parse_report(serialize_report(r)) == r.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass

from .errors import FormatError

REPORT_VERSION = 1


@dataclass(frozen=True)
class FunctionRow:
    name: str
    goals: int
    covered: int
    carves: int
    selections: int
    parameterized: bool
    skipped: bool   # dropped from selection: unmapped, or repeatedly sterile


@dataclass(frozen=True)
class LiftStats:
    unit_executions: int = 0
    unit_winners: int = 0
    lift_attempts: int = 0
    effective: int = 0
    other_goal: int = 0
    false_positive: int = 0

    @property
    def pct_lifted(self) -> float:
        if not self.unit_winners:
            return 0.0
        return 100.0 * self.lift_attempts / self.unit_winners

    @property
    def pct_effective(self) -> float:
        if not self.lift_attempts:
            return 0.0
        return 100.0 * self.effective / self.lift_attempts


@dataclass(frozen=True)
class SpeedupStats:
    system_executions: int = 0
    unit_executions: int = 0
    median_system_ms: float = 0.0
    median_unit_ms: float = 0.0
    speedup: float = 0.0


@dataclass(frozen=True)
class EffectiveInput:
    argv: tuple[bytes, ...]
    stdin: bytes
    goals: tuple[str, ...]
    crash: str | None
    corpus_path: str | None


@dataclass(frozen=True)
class CampaignReport:
    version: int
    program: str
    mode: str
    rng_seed: int
    config: dict
    total_goals: int
    discovered: int
    coverage_series: tuple[tuple[float, float], ...]
    first_discovery: tuple[tuple[float, str, str], ...]
    functions: tuple[FunctionRow, ...]
    carve_stats: dict
    lift_stats: LiftStats
    speedup: SpeedupStats
    effective_inputs: tuple[EffectiveInput, ...]
    total_wall_s: float
    budget_used: float
    system_wall_total_s: float


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"))


def serialize_report(r: CampaignReport) -> str:
    doc = {
        "version": r.version,
        "program": r.program,
        "mode": r.mode,
        "rng_seed": r.rng_seed,
        "config": r.config,
        "total_goals": r.total_goals,
        "discovered": r.discovered,
        "coverage_series": [[e, f] for e, f in r.coverage_series],
        "first_discovery": [[e, g, s] for e, g, s in r.first_discovery],
        "functions": [
            {"name": f.name, "goals": f.goals, "covered": f.covered,
             "carves": f.carves, "selections": f.selections,
             "parameterized": f.parameterized, "skipped": f.skipped}
            for f in r.functions
        ],
        "carve_stats": r.carve_stats,
        "lift_stats": {
            "unit_executions": r.lift_stats.unit_executions,
            "unit_winners": r.lift_stats.unit_winners,
            "lift_attempts": r.lift_stats.lift_attempts,
            "effective": r.lift_stats.effective,
            "other_goal": r.lift_stats.other_goal,
            "false_positive": r.lift_stats.false_positive,
            # derived, for human readers; parse recomputes them
            "pct_lifted": r.lift_stats.pct_lifted,
            "pct_effective": r.lift_stats.pct_effective,
        },
        "speedup": {
            "system_executions": r.speedup.system_executions,
            "unit_executions": r.speedup.unit_executions,
            "median_system_ms": r.speedup.median_system_ms,
            "median_unit_ms": r.speedup.median_unit_ms,
            "speedup": r.speedup.speedup,
        },
        "effective_inputs": [
            {"argv": [_b64(a) for a in e.argv], "stdin": _b64(e.stdin),
             "goals": list(e.goals), "crash": e.crash,
             "corpus_path": e.corpus_path}
            for e in r.effective_inputs
        ],
        "total_wall_s": r.total_wall_s,
        "budget_used": r.budget_used,
        "system_wall_total_s": r.system_wall_total_s,
    }
    return json.dumps(doc, indent=2)


def parse_report(text: str) -> CampaignReport:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"report is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError("report document must be a JSON object")
    if doc.get("version") != REPORT_VERSION:
        raise FormatError(
            f"unsupported report version {doc.get('version')!r}, "
            f"expected {REPORT_VERSION}")
    try:
        ls = doc["lift_stats"]
        sp = doc["speedup"]
        return CampaignReport(
            version=doc["version"],
            program=doc["program"],
            mode=doc["mode"],
            rng_seed=doc["rng_seed"],
            config=doc["config"],
            total_goals=doc["total_goals"],
            discovered=doc["discovered"],
            coverage_series=tuple((float(e), float(f))
                                  for e, f in doc["coverage_series"]),
            first_discovery=tuple((float(e), str(g), str(s))
                                  for e, g, s in doc["first_discovery"]),
            functions=tuple(
                FunctionRow(f["name"], f["goals"], f["covered"], f["carves"],
                            f["selections"], f["parameterized"], f["skipped"])
                for f in doc["functions"]),
            carve_stats=doc["carve_stats"],
            lift_stats=LiftStats(
                unit_executions=ls["unit_executions"],
                unit_winners=ls["unit_winners"],
                lift_attempts=ls["lift_attempts"],
                effective=ls["effective"],
                other_goal=ls["other_goal"],
                false_positive=ls["false_positive"]),
            speedup=SpeedupStats(
                system_executions=sp["system_executions"],
                unit_executions=sp["unit_executions"],
                median_system_ms=sp["median_system_ms"],
                median_unit_ms=sp["median_unit_ms"],
                speedup=sp["speedup"]),
            effective_inputs=tuple(
                EffectiveInput(argv=tuple(_unb64(a) for a in e["argv"]),
                               stdin=_unb64(e["stdin"]),
                               goals=tuple(e["goals"]), crash=e["crash"],
                               corpus_path=e["corpus_path"])
                for e in doc["effective_inputs"]),
            total_wall_s=doc["total_wall_s"],
            budget_used=doc["budget_used"],
            system_wall_total_s=doc["system_wall_total_s"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"report document is malformed: {exc!r}") from exc


def emit_series(report: CampaignReport, path) -> None:
    """Write the coverage series as two-column plain text.

    Column one is elapsed budget (seconds or steps, per the campaign
    clock), column two the coverage fraction.  Output is byte-stable
    for a given report.
    """
    lines = ["# elapsed coverage_fraction"]
    for elapsed, fraction in report.coverage_series:
        lines.append(f"{elapsed!r} {fraction!r}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
