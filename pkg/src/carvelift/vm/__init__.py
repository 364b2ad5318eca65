from .interp import (
    CRASH_KINDS, RunOptions, RunResult, RunStatus, TraceOverflow,
    TypeMismatch, call_function, run_system, run_with_tracing,
    serialize_run_result,
)
from .trace import (
    AllocEvent, BranchEvent, CallEvent, GlobalStoreEvent, ReturnEvent,
    TraceEvent, read_trace, write_trace,
)
from .values import (
    INT64_MAX, INT64_MIN, Record, Ref, Segment, SegmentTable, copy_segments,
    segment_byte_size, value_byte_size, wrap64,
)

__all__ = [
    "AllocEvent", "BranchEvent", "CallEvent", "CRASH_KINDS",
    "GlobalStoreEvent", "INT64_MAX", "INT64_MIN", "Record", "Ref",
    "ReturnEvent", "RunOptions", "RunResult", "RunStatus", "Segment",
    "SegmentTable", "TraceEvent", "TraceOverflow", "TypeMismatch",
    "call_function", "copy_segments", "read_trace", "run_system",
    "run_with_tracing", "segment_byte_size", "serialize_run_result",
    "value_byte_size", "wrap64", "write_trace",
]
