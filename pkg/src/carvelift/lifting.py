"""Lift unit-level parameter assignments back to system inputs.

A mapping ties context leaves to byte ranges of the original system
input.  Lifting rewrites those ranges with the assigned values and
produces a candidate system input; validation runs the candidate and
classifies whether the unit-level discovery survived the trip.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ToolError
from .inputs import SystemInput
from .mapping import ENC_DECIMAL, Mapping, Match
from .unitgen import ParamAssignment
from .vm.interp import RunOptions, RunStatus, TypeMismatch, run_system


class UnmappedParameter(ToolError):
    """An assignment names a path the mapping has no byte range for."""


@dataclass(frozen=True)
class LiftedInput:
    input: SystemInput
    replaced: tuple[tuple[Match, bytes], ...]
    untouched: frozenset[int]


def _encode(match: Match, value) -> bytes:
    if match.encoding == ENC_DECIMAL:
        if not isinstance(value, int):
            raise TypeMismatch(f"{match.leaf} maps decimally, needs an int")
        return str(value).encode("ascii")
    if not isinstance(value, (bytes, bytearray)):
        raise TypeMismatch(f"{match.leaf} maps raw bytes, needs bytes")
    return bytes(value)


def lift(mapping: Mapping, assignment: ParamAssignment,
         origin: SystemInput, first_occurrence_only: bool = False) -> LiftedInput:
    """Rewrite every matched occurrence of each assigned parameter.

    Within one input element replacements run right to left so earlier
    ranges stay valid while the buffer length changes.  Ranges that
    overlap a range already rewritten simply edit the evolving buffer;
    with equal-length replacements this is idempotent, with shorter
    ones the occurrences collapse.
    """
    elements = list(origin.elements())
    pending: dict[int, list[tuple[Match, bytes]]] = {}
    for path in sorted(assignment.assignments):
        hits = [mt for mt in mapping.matches if mt.leaf == path]
        if not hits:
            raise UnmappedParameter(f"no input bytes map to {path}")
        if first_occurrence_only:
            hits = hits[:1]
        enc = _encode(hits[0], assignment.assignments[path])
        for mt in hits:
            pending.setdefault(mt.input_index, []).append((mt, enc))

    replaced: list[tuple[Match, bytes]] = []
    for idx in sorted(pending):
        buf = elements[idx]
        for mt, enc in sorted(pending[idx], key=lambda t: t[0].start,
                              reverse=True):
            buf = buf[:mt.start] + enc + buf[mt.end:]
            replaced.append((mt, enc))
        elements[idx] = buf

    untouched = frozenset(range(len(elements))) - pending.keys()
    argv = tuple(elements[:len(origin.argv)])
    return LiftedInput(SystemInput(argv, elements[-1]), tuple(replaced),
                       untouched)


@dataclass(frozen=True)
class LiftOutcome:
    classification: str     # effective | other-goal | false-positive
    discovered: frozenset   # system goals new relative to prior coverage
    sought: frozenset
    status: RunStatus
    lifted: LiftedInput
    steps: int = 0          # cost of the validation run, for budget clocks
    wall_time_s: float = 0.0


def _merge(cov, goals, elapsed: float) -> None:
    if hasattr(cov, "record"):
        for g in sorted(goals, key=str):
            cov.record(g, elapsed, "lift")
    else:
        cov.update(goals)


def validate(program, lifted: LiftedInput, sought: frozenset, cov,
             unit_crash: tuple[str, str] | None = None,
             elapsed: float = 0.0,
             opts: RunOptions = RunOptions()) -> LiftOutcome:
    """Run the lifted input at system level and classify the result.

    effective: a sought goal shows up in the system run, or the unit
    crash reproduces with the same kind in the same function.
    other-goal: no sought goal, but some goal new to the campaign.
    false-positive: nothing new at all.

    Newly discovered goals are merged into cov in every case; a lift
    that misses its target still paid for real coverage.
    """
    known = set(getattr(cov, "discovered", cov))
    result = run_system(program, lifted.input, opts)
    discovered = frozenset(result.coverage - known)
    _merge(cov, discovered, elapsed)

    sought = frozenset(sought)
    reproduced = (
        unit_crash is not None
        and result.status.is_crash()
        and (result.status.crash_kind, result.status.crash_fn) == unit_crash
    )
    if (sought & discovered) or reproduced:
        classification = "effective"
    elif discovered:
        classification = "other-goal"
    else:
        classification = "false-positive"
    return LiftOutcome(classification, discovered, sought,
                       result.status, lifted, result.steps,
                       result.wall_time_s)
