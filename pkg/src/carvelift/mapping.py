"""Substring-equality mapping between context leaves and system inputs.

A context leaf becomes a parameter when its encoding occurs somewhere in
the system input: byte-string leaves match raw, integer leaves match
their shortest decimal rendering, floats never match.  Every occurrence
is recorded (including overlapping ones); the lifter decides what to do
with multiplicity.

The mapping is a heuristic guess at which context values were copied in
from the input.  Coincidental matches are possible and expected; lifting
re-validates every candidate at system level, so a wrong guess costs a
system execution, never a wrong report.
"""

from __future__ import annotations

from dataclasses import dataclass

from .carving import CarvedTest
from .inputs import SystemInput

ENC_RAW = "raw-bytes"
ENC_DECIMAL = "decimal-int"


@dataclass(frozen=True)
class MapOptions:
    min_match_len: int = 3


@dataclass(frozen=True)
class Match:
    leaf: str
    input_index: int
    start: int
    end: int
    encoding: str


@dataclass
class Mapping:
    carved: CarvedTest
    matches: tuple[Match, ...]
    parameters: frozenset[str]
    unmatched_inputs: frozenset[int]


def _needle_for(value) -> tuple[bytes, str] | None:
    if isinstance(value, bytes):
        return value, ENC_RAW
    if isinstance(value, int):
        return str(value).encode("ascii"), ENC_DECIMAL
    return None


def classify_leaf(value, s: SystemInput, opts: MapOptions):
    """All occurrences of a leaf's encoding across the input elements.

    Returns (input index, (start, end), encoding) triples in element
    order, then offset order.  Overlapping occurrences all count.
    """
    pair = _needle_for(value)
    if pair is None:
        return []
    needle, encoding = pair
    if len(needle) < opts.min_match_len:
        return []
    out = []
    for idx, elem in enumerate(s.elements()):
        pos = elem.find(needle)
        while pos >= 0:
            out.append((idx, (pos, pos + len(needle)), encoding))
            pos = elem.find(needle, pos + 1)
    return out


def build_mapping(c: CarvedTest, s: SystemInput,
                  opts: MapOptions = MapOptions()) -> Mapping:
    matches = []
    for path, value in c.context.leaves():
        for idx, (start, end), encoding in classify_leaf(value, s, opts):
            matches.append(Match(path, idx, start, end, encoding))
    touched = {m.input_index for m in matches}
    return Mapping(
        carved=c,
        matches=tuple(matches),
        parameters=frozenset(m.leaf for m in matches),
        unmatched_inputs=frozenset(range(len(s.elements()))) - touched,
    )


def hrvar(m: Mapping) -> tuple[str, ...]:
    """Parameter paths in a stable (path-lexicographic) order."""
    return tuple(sorted(m.parameters))
