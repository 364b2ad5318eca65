"""Carve unit tests out of traced system runs.

A carve is one user-function invocation plus the context it ran against:
the argument values, every global, and the slice of the heap reachable
from either, all copied at call time.  Replaying a carve hands that
context to ``call_function``; for a complete (non-truncated) context the
replay covers exactly the goals the original call covered.

Context root paths follow the language's own access syntax:

    arg[0]                first argument
    global:db             a global
    global:db[2].name     ref index, then record field

so a path printed in a report can be read back against the source.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .errors import FormatError
from .lang.ast import (
    EArrayLit, EBinary, ECall, EField, EIndex, ERecordLit, EUnary, Expr,
    Program, SAssign, SExpr, SIf, SIndexSet, SLet, SReturn, SWhile,
    iter_stmts,
)
from .lang.goals import BranchGoal
from .vm.interp import RunResult
from .vm.trace import BranchEvent, CallEvent, ReturnEvent
from .vm.values import (
    Record, Ref, Segment, SegmentTable, copy_segments, decode_segment,
    decode_value, encode_segment, encode_value, iter_refs, segment_byte_size,
)

SNAPSHOT_VERSION = 1

# Builtins that read the outside world.  A function that can reach one of
# these would observe a different world inside a replay, so it is never
# carved.
_INPUT_BUILTINS = ("arg", "arg_count", "read_all_input")


# ---------------------------------------------------------------- contexts

def parse_path(path: str):
    """Split a context path into its root and access steps.

    Returns (root, steps) where steps is a list of ("index", i) and
    ("field", name) entries.  Raises KeyError on malformed paths so that
    lookup and parse failures surface the same way.
    """
    if path.startswith("arg["):
        end = path.find("]")
        if end < 0 or not path[4:end].isdigit():
            raise KeyError(path)
        root, rest = path[:end + 1], path[end + 1:]
    elif path.startswith("global:"):
        i = 7
        while i < len(path) and (path[i].isalnum() or path[i] == "_"):
            i += 1
        if i == 7:
            raise KeyError(path)
        root, rest = path[:i], path[i:]
    else:
        raise KeyError(path)

    steps = []
    while rest:
        if rest[0] == "[":
            end = rest.find("]")
            if end < 0 or not rest[1:end].isdigit():
                raise KeyError(path)
            steps.append(("index", int(rest[1:end])))
            rest = rest[end + 1:]
        elif rest[0] == ".":
            i = 1
            while i < len(rest) and (rest[i].isalnum() or rest[i] == "_"):
                i += 1
            if i == 1:
                raise KeyError(path)
            steps.append(("field", rest[1:i]))
            rest = rest[i:]
        else:
            raise KeyError(path)
    return root, steps


@dataclass
class Context:
    """Everything one invocation could see: args, globals, reachable heap."""

    roots: dict[str, object]
    segments: SegmentTable
    truncated: bool

    def var(self) -> tuple[str, ...]:
        return tuple(self.roots)

    def leaves(self):
        """Yield (path, value) for every scalar leaf, argument roots first.

        Aliased segments are walked once, claimed by the first path that
        reaches them; that also terminates cyclic structures.
        """
        visited: set[int] = set()

        def walk(path, v):
            if isinstance(v, (int, float, bytes)):
                yield path, v
            elif isinstance(v, tuple):
                for i, x in enumerate(v):
                    yield from walk(f"{path}[{i}]", x)
            elif isinstance(v, Record):
                for name, x in v.fields.items():
                    yield from walk(f"{path}.{name}", x)
            elif isinstance(v, Ref):
                if v.seg in visited or v.seg not in self.segments:
                    return
                visited.add(v.seg)
                elems = self.segments[v.seg].elems
                for i, x in enumerate(elems[v.off:]):
                    yield from walk(f"{path}[{i}]", x)

        for root, v in self.roots.items():
            yield from walk(root, v)

    def resolve(self, path: str):
        """Look up the value a path denotes. Raises KeyError when absent."""
        root, steps = parse_path(path)
        if root not in self.roots:
            raise KeyError(path)
        v = self.roots[root]
        for kind, key in steps:
            if kind == "index":
                if isinstance(v, Ref):
                    seg = self.segments.get(v.seg)
                    if seg is None:
                        raise KeyError(path)
                    idx = v.off + key
                    if not 0 <= idx < len(seg.elems):
                        raise KeyError(path)
                    v = seg.elems[idx]
                elif isinstance(v, tuple):
                    if not 0 <= key < len(v):
                        raise KeyError(path)
                    v = v[key]
                else:
                    raise KeyError(path)
            else:
                if not isinstance(v, Record) or key not in v.fields:
                    raise KeyError(path)
                v = v.fields[key]
        return v


@dataclass
class CarvedTest:
    start: tuple[str, int]  # (function name, call index in the origin trace)
    context: Context
    origin: str
    observed_coverage: frozenset[BranchGoal]


@dataclass(frozen=True)
class CarvePolicy:
    max_dump_bytes: int = 65536
    per_fn_cap: int = 8
    allowlist: Optional[frozenset[str]] = None


@dataclass
class CarveStats:
    carved: int = 0
    truncated: int = 0
    skipped_incomplete: int = 0
    skipped_capped: int = 0
    skipped_filtered: int = 0
    skipped_input_dependent: int = 0


# ---------------------------------------------------------------- snapshots

def _sever(v, keep: set[int]):
    """Replace refs into dropped segments with null."""
    if isinstance(v, Ref):
        return v if v.seg in keep else None
    if isinstance(v, tuple):
        return tuple(_sever(x, keep) for x in v)
    if isinstance(v, Record):
        return Record(v.rtype, {k: _sever(x, keep) for k, x in v.fields.items()})
    return v


def snapshot_reachable(roots, table: SegmentTable,
                       max_bytes: int) -> tuple[SegmentTable, bool]:
    """Breadth-first heap slice under a byte budget.

    Traversal stops entirely at the first segment that would push the
    accumulated size past max_bytes, so growing the budget only ever adds
    segments.  Refs out of the kept slice are severed to null.
    """
    if max_bytes <= 0:
        raise ValueError("max_bytes must be positive")
    queue: list[int] = []
    seen: set[int] = set()

    def discover(v):
        for r in iter_refs(v):
            if r.seg not in seen and r.seg in table:
                seen.add(r.seg)
                queue.append(r.seg)

    for v in roots:
        discover(v)

    kept: SegmentTable = {}
    used = 0
    truncated = False
    qi = 0
    while qi < len(queue):
        sid = queue[qi]
        qi += 1
        seg = table[sid]
        size = segment_byte_size(seg)
        if used + size > max_bytes:
            truncated = True
            break
        used += size
        kept[sid] = seg.copy()
        for elem in seg.elems:
            discover(elem)

    keep_ids = set(kept)
    for seg in kept.values():
        seg.elems = [_sever(x, keep_ids) for x in seg.elems]
    return kept, truncated


# ---------------------------------------------------------------- carving

def _calls_in(expr: Expr):
    if isinstance(expr, ECall):
        yield expr.name
        for a in expr.args:
            yield from _calls_in(a)
    elif isinstance(expr, EUnary):
        yield from _calls_in(expr.operand)
    elif isinstance(expr, EBinary):
        yield from _calls_in(expr.left)
        yield from _calls_in(expr.right)
    elif isinstance(expr, EIndex):
        yield from _calls_in(expr.obj)
        yield from _calls_in(expr.index)
    elif isinstance(expr, EField):
        yield from _calls_in(expr.obj)
    elif isinstance(expr, ERecordLit):
        for _, x in expr.fields:
            yield from _calls_in(x)
    elif isinstance(expr, EArrayLit):
        for x in expr.items:
            yield from _calls_in(x)


def _stmt_exprs(s):
    if isinstance(s, (SLet, SAssign, SExpr, SReturn)):
        if s.value is not None:
            yield s.value
    elif isinstance(s, SIndexSet):
        yield s.obj
        yield s.index
        yield s.value
    elif isinstance(s, SIf):
        yield s.cond
    elif isinstance(s, SWhile):
        yield s.cond


def input_reading_functions(program: Program) -> frozenset[str]:
    """Functions that may (transitively) call an input builtin."""
    callees: dict[str, set[str]] = {}
    for fn in program.functions:
        names: set[str] = set()
        for s in iter_stmts(fn.body):
            for e in _stmt_exprs(s):
                names.update(_calls_in(e))
        callees[fn.name] = names

    tainted = {f for f, ns in callees.items()
               if any(b in ns for b in _INPUT_BUILTINS)}
    changed = True
    while changed:
        changed = False
        for f, ns in callees.items():
            if f not in tainted and ns & tainted:
                tainted.add(f)
                changed = True
    return frozenset(tainted)


def carve_with_stats(program: Program, result: RunResult, policy: CarvePolicy,
                     origin: str = "") -> tuple[list[CarvedTest], CarveStats]:
    """Carve every admissible completed call out of a traced run."""
    if result.trace is None:
        raise ValueError("carving needs a traced run (use run_with_tracing)")

    stats = CarveStats()
    input_dependent = input_reading_functions(program)

    open_calls: dict[int, tuple[CallEvent, set]] = {}
    completed: list[tuple[CallEvent, frozenset]] = []
    for ev in result.trace:
        if isinstance(ev, CallEvent):
            open_calls[ev.call_index] = (ev, set())
        elif isinstance(ev, ReturnEvent):
            entry = open_calls.pop(ev.call_index, None)
            if entry is not None:
                completed.append((entry[0], frozenset(entry[1])))
        elif isinstance(ev, BranchEvent):
            for _, goals in open_calls.values():
                goals.add(ev.goal)

    stats.skipped_incomplete = sum(
        1 for ev, _ in open_calls.values() if ev.fn != program.entry)

    completed.sort(key=lambda entry: entry[0].call_index)
    per_fn: dict[str, int] = {}
    out: list[CarvedTest] = []
    for ev, goals in completed:
        if ev.fn == program.entry:
            continue
        if ev.fn in input_dependent:
            stats.skipped_input_dependent += 1
            continue
        if policy.allowlist is not None and ev.fn not in policy.allowlist:
            stats.skipped_filtered += 1
            continue
        if per_fn.get(ev.fn, 0) >= policy.per_fn_cap:
            stats.skipped_capped += 1
            continue
        per_fn[ev.fn] = per_fn.get(ev.fn, 0) + 1

        roots: dict[str, object] = {
            f"arg[{i}]": v for i, v in enumerate(ev.args)}
        for name in sorted(ev.globals):
            roots[f"global:{name}"] = ev.globals[name]
        segs, truncated = snapshot_reachable(
            roots.values(), ev.segments, policy.max_dump_bytes)
        if truncated:
            stats.truncated += 1
            keep = set(segs)
            roots = {p: _sever(v, keep) for p, v in roots.items()}
        out.append(CarvedTest(
            start=(ev.fn, ev.call_index),
            context=Context(roots, segs, truncated),
            origin=origin,
            observed_coverage=goals,
        ))
    stats.carved = len(out)
    return out, stats


def carve(program: Program, result: RunResult, policy: CarvePolicy,
          origin: str = "") -> list[CarvedTest]:
    return carve_with_stats(program, result, policy, origin)[0]


def context_to_world(ctx: Context):
    """Deep-copied (args, world) ready for call_function.

    The copy keeps replays from contaminating the stored carve: the callee
    mutates segments in place.
    """
    args = []
    i = 0
    while f"arg[{i}]" in ctx.roots:
        args.append(ctx.roots[f"arg[{i}]"])
        i += 1
    globals_ = {path[len("global:"):]: v
                for path, v in ctx.roots.items() if path.startswith("global:")}
    return args, (globals_, copy_segments(ctx.segments))


# ---------------------------------------------------------------- persistence

def save_snapshot(carved: CarvedTest, path) -> None:
    doc = {
        "version": SNAPSHOT_VERSION,
        "start": {"fn": carved.start[0], "call_index": carved.start[1]},
        "origin": carved.origin,
        "truncated": carved.context.truncated,
        "roots": [[p, encode_value(v)] for p, v in carved.context.roots.items()],
        "segments": {str(sid): encode_segment(seg)
                     for sid, seg in sorted(carved.context.segments.items())},
        "observed_coverage": sorted(str(g) for g in carved.observed_coverage),
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_snapshot(path) -> CarvedTest:
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or doc.get("version") != SNAPSHOT_VERSION:
        raise FormatError(
            f"unsupported snapshot version: {doc.get('version')!r}")
    ctx = Context(
        roots={p: decode_value(v) for p, v in doc["roots"]},
        segments={int(sid): decode_segment(s)
                  for sid, s in doc["segments"].items()},
        truncated=bool(doc["truncated"]),
    )
    return CarvedTest(
        start=(str(doc["start"]["fn"]), int(doc["start"]["call_index"])),
        context=ctx,
        origin=str(doc["origin"]),
        observed_coverage=frozenset(
            BranchGoal.parse(g) for g in doc["observed_coverage"]),
    )
