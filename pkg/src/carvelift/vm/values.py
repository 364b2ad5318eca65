"""Runtime value model and the segment table.

Values are represented with plain Python types where possible:

    int    -> 64-bit signed integer (arithmetic wraps, two's complement)
    float  -> 64-bit float
    bytes  -> immutable byte string
    None   -> the null sentinel (legal for any ref, and what truncation
              leaves behind when a segment is dropped from a snapshot)
    tuple  -> immutable inline array
    Record -> immutable named record
    Ref    -> (segment id, element offset) into a SegmentTable

Mutable storage lives only in segments.  A Ref with a nonzero offset is a
derived pointer: indexing is relative to the offset and the remaining
length is the segment length minus the offset.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field

from ..errors import FormatError

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1
_U64 = 1 << 64


def wrap64(v: int) -> int:
    """Reduce an arbitrary Python int to two's-complement 64-bit."""
    v &= _U64 - 1
    return v - _U64 if v > INT64_MAX else v


class Ref:
    __slots__ = ("seg", "off")

    def __init__(self, seg: int, off: int):
        self.seg = seg
        self.off = off

    def __eq__(self, other):
        return isinstance(other, Ref) and other.seg == self.seg and other.off == self.off

    def __hash__(self):
        return hash((Ref, self.seg, self.off))

    def __repr__(self):
        return f"Ref({self.seg}, {self.off})"


class Record:
    """Immutable record value. Field order follows the declaration."""

    __slots__ = ("rtype", "fields")

    def __init__(self, rtype: str, fields: dict):
        self.rtype = rtype
        self.fields = fields

    def with_field(self, name: str, value) -> "Record":
        updated = dict(self.fields)
        updated[name] = value
        return Record(self.rtype, updated)

    def __eq__(self, other):
        return (isinstance(other, Record) and other.rtype == self.rtype
                and other.fields == self.fields)

    def __hash__(self):
        return hash((Record, self.rtype, tuple(self.fields.items())))

    def __repr__(self):
        inner = ", ".join(f"{k}: {v!r}" for k, v in self.fields.items())
        return f"{self.rtype}{{{inner}}}"


ORIGINS = ("heap", "global", "argv", "input")


@dataclass
class Segment:
    """One allocation: a fixed-length run of values."""

    elem_type: str
    length: int
    elems: list
    origin: str = "heap"

    def copy(self) -> "Segment":
        return Segment(self.elem_type, self.length, list(self.elems), self.origin)


SegmentTable = dict[int, Segment]


def copy_segments(table: SegmentTable) -> SegmentTable:
    """Copy a table deeply enough that element stores cannot leak across.

    Element values themselves are immutable, so copying each element list
    is a full isolation boundary.
    """
    return {sid: seg.copy() for sid, seg in table.items()}


def value_type_name(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):  # guard: bool is an int subclass but never a value
        raise TypeError("bool is not a runtime value")
    if isinstance(v, int):
        return "int"
    if isinstance(v, float):
        return "float"
    if isinstance(v, bytes):
        return "bytes"
    if isinstance(v, tuple):
        return "array"
    if isinstance(v, Record):
        return f"record:{v.rtype}"
    if isinstance(v, Ref):
        return "ref"
    raise TypeError(f"not a runtime value: {v!r}")


def is_value(v) -> bool:
    try:
        value_type_name(v)
        return True
    except TypeError:
        return False


# ---------------------------------------------------------------- sizing
#
# Deterministic byte accounting used by snapshot budgets.  Scalars and refs
# cost 8; byte strings and composites cost an 8-byte header plus contents;
# a segment costs an 8-byte header plus its elements.

SCALAR_SIZE = 8
HEADER_SIZE = 8


def value_byte_size(v) -> int:
    if v is None or isinstance(v, (int, float, Ref)):
        return SCALAR_SIZE
    if isinstance(v, bytes):
        return HEADER_SIZE + len(v)
    if isinstance(v, tuple):
        return HEADER_SIZE + sum(value_byte_size(x) for x in v)
    if isinstance(v, Record):
        return HEADER_SIZE + sum(value_byte_size(x) for x in v.fields.values())
    raise TypeError(f"not a runtime value: {v!r}")


def segment_byte_size(seg: Segment) -> int:
    return HEADER_SIZE + sum(value_byte_size(x) for x in seg.elems)


# ---------------------------------------------------------------- encoding

def encode_value(v) -> object:
    """JSON-able encoding. Bytes go through base64."""
    if v is None:
        return {"t": "null"}
    if isinstance(v, int):
        return {"t": "int", "v": v}
    if isinstance(v, float):
        return {"t": "float", "v": repr(v)}
    if isinstance(v, bytes):
        return {"t": "bytes", "v": base64.b64encode(v).decode("ascii")}
    if isinstance(v, tuple):
        return {"t": "array", "v": [encode_value(x) for x in v]}
    if isinstance(v, Record):
        return {"t": "record", "name": v.rtype,
                "fields": [[k, encode_value(x)] for k, x in v.fields.items()]}
    if isinstance(v, Ref):
        return {"t": "ref", "seg": v.seg, "off": v.off}
    raise TypeError(f"not a runtime value: {v!r}")


def decode_value(obj: object):
    if not isinstance(obj, dict) or "t" not in obj:
        raise FormatError(f"malformed value encoding: {obj!r}")
    t = obj["t"]
    if t == "null":
        return None
    if t == "int":
        return int(obj["v"])
    if t == "float":
        return float(obj["v"])
    if t == "bytes":
        return base64.b64decode(obj["v"])
    if t == "array":
        return tuple(decode_value(x) for x in obj["v"])
    if t == "record":
        return Record(obj["name"], {k: decode_value(x) for k, x in obj["fields"]})
    if t == "ref":
        return Ref(int(obj["seg"]), int(obj["off"]))
    raise FormatError(f"unknown value tag: {t!r}")


def encode_segment(seg: Segment) -> object:
    return {
        "type": seg.elem_type,
        "len": seg.length,
        "elems": [encode_value(x) for x in seg.elems],
        "origin": seg.origin,
    }


def decode_segment(obj: object) -> Segment:
    if not isinstance(obj, dict):
        raise FormatError(f"malformed segment encoding: {obj!r}")
    return Segment(
        elem_type=str(obj["type"]),
        length=int(obj["len"]),
        elems=[decode_value(x) for x in obj["elems"]],
        origin=str(obj["origin"]),
    )


def iter_refs(v):
    """Yield every Ref inside a value tree."""
    if isinstance(v, Ref):
        yield v
    elif isinstance(v, tuple):
        for x in v:
            yield from iter_refs(x)
    elif isinstance(v, Record):
        for x in v.fields.values():
            yield from iter_refs(x)


def reachable_segments(roots, table: SegmentTable) -> SegmentTable:
    """Deep copy of every segment reachable from the given root values.

    Breadth-first over refs; the result is closed under ref traversal.
    """
    queue: list[int] = []
    seen: set[int] = set()
    for v in roots:
        for r in iter_refs(v):
            if r.seg not in seen and r.seg in table:
                seen.add(r.seg)
                queue.append(r.seg)
    out: SegmentTable = {}
    while queue:
        sid = queue.pop(0)
        seg = table[sid]
        out[sid] = seg.copy()
        for elem in seg.elems:
            for r in iter_refs(elem):
                if r.seg not in seen and r.seg in table:
                    seen.add(r.seg)
                    queue.append(r.seg)
    return out
