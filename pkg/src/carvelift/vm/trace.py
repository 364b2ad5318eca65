"""Trace events and their line-delimited file format.

One JSON object per line.  The `kind` field selects the event; the other
fields are fixed per kind (schema version 1):

    call          call_index, fn, args (argument values, the global values
                  at call time, and a deep copy of every segment reachable
                  from either; this is the invocation dump carving reads)
    return        call_index
    global-store  global, value
    alloc         segment, len, origin
    branch        goal

Byte strings inside values are base64.  Bit-exactness of this format is
only promised within one tool version.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from ..errors import FormatError
from ..lang.goals import BranchGoal
from .values import (
    SegmentTable, decode_segment, decode_value, encode_segment, encode_value,
)

TRACE_VERSION = "1"


@dataclass
class CallEvent:
    call_index: int
    fn: str
    args: list
    globals: dict[str, object]
    segments: SegmentTable


@dataclass
class ReturnEvent:
    call_index: int


@dataclass
class GlobalStoreEvent:
    name: str
    value: object


@dataclass
class AllocEvent:
    segment: int
    length: int
    origin: str


@dataclass
class BranchEvent:
    goal: BranchGoal


TraceEvent = CallEvent | ReturnEvent | GlobalStoreEvent | AllocEvent | BranchEvent


def encode_event(ev: TraceEvent) -> dict:
    if isinstance(ev, CallEvent):
        return {
            "kind": "call",
            "call_index": ev.call_index,
            "fn": ev.fn,
            "args": {
                "values": [encode_value(v) for v in ev.args],
                "globals": {k: encode_value(v) for k, v in sorted(ev.globals.items())},
                "segments": {str(sid): encode_segment(s) for sid, s in sorted(ev.segments.items())},
            },
        }
    if isinstance(ev, ReturnEvent):
        return {"kind": "return", "call_index": ev.call_index}
    if isinstance(ev, GlobalStoreEvent):
        return {"kind": "global-store", "global": ev.name, "value": encode_value(ev.value)}
    if isinstance(ev, AllocEvent):
        return {"kind": "alloc", "segment": ev.segment, "len": ev.length, "origin": ev.origin}
    if isinstance(ev, BranchEvent):
        return {"kind": "branch", "goal": str(ev.goal)}
    raise TypeError(f"not a trace event: {ev!r}")


def decode_event(obj: dict) -> TraceEvent:
    kind = obj.get("kind")
    if kind == "call":
        dump = obj["args"]
        return CallEvent(
            call_index=int(obj["call_index"]),
            fn=str(obj["fn"]),
            args=[decode_value(v) for v in dump["values"]],
            globals={k: decode_value(v) for k, v in dump["globals"].items()},
            segments={int(sid): decode_segment(s) for sid, s in dump["segments"].items()},
        )
    if kind == "return":
        return ReturnEvent(int(obj["call_index"]))
    if kind == "global-store":
        return GlobalStoreEvent(str(obj["global"]), decode_value(obj["value"]))
    if kind == "alloc":
        return AllocEvent(int(obj["segment"]), int(obj["len"]), str(obj["origin"]))
    if kind == "branch":
        return BranchEvent(BranchGoal.parse(obj["goal"]))
    raise FormatError(f"unknown trace event kind: {kind!r}")


def write_trace(path, events: list[TraceEvent]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(json.dumps({"kind": "header", "version": TRACE_VERSION}, sort_keys=True))
        fh.write("\n")
        for ev in events:
            fh.write(json.dumps(encode_event(ev), sort_keys=True))
            fh.write("\n")


def read_trace(path) -> list[TraceEvent]:
    events: list[TraceEvent] = []
    with open(path, "r", encoding="ascii") as fh:
        header = json.loads(fh.readline())
        if header.get("kind") != "header" or header.get("version") != TRACE_VERSION:
            raise FormatError(f"unsupported trace header: {header!r}")
        for line in fh:
            line = line.strip()
            if line:
                events.append(decode_event(json.loads(line)))
    return events
