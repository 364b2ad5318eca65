"""Carving tests.

The fidelity oracle is independent of the carver: expected per-call
coverage is recomputed here by slicing the raw trace between each Call
and its matching Return, and every carve is replayed through
call_function to check it reproduces that slice.
"""

import dataclasses

import pytest

from carvelift.carving import (
    CarvePolicy, CarvedTest, Context, carve, carve_with_stats,
    context_to_world, load_snapshot, save_snapshot, snapshot_reachable,
)
from carvelift.errors import FormatError
from carvelift.lang.parser import parse
from carvelift.rng import Rng
from carvelift.vm.interp import call_function, run_with_tracing
from carvelift.vm.trace import BranchEvent, CallEvent, ReturnEvent
from carvelift.vm.values import Record, Ref, Segment

from conftest import SUBJECT_NAMES, load_subject, mk_input, random_input_for


def slice_goals(trace, call_index):
    """Oracle: goals observed between Call(call_index) and its Return."""
    goals = set()
    depth = None
    for ev in trace:
        if isinstance(ev, CallEvent) and ev.call_index == call_index:
            depth = 0
        elif depth is not None:
            if isinstance(ev, CallEvent):
                depth += 1
            elif isinstance(ev, ReturnEvent):
                if ev.call_index == call_index:
                    return frozenset(goals)
                depth -= 1
            elif isinstance(ev, BranchEvent):
                goals.add(ev.goal)
    raise AssertionError(f"call {call_index} has no matching return")


def replay(program, carved):
    args, world = context_to_world(carved.context)
    return call_function(program, carved.start[0], args, world)


# ------------------------------------------------------------ basics

def test_empty_main_carves_nothing():
    prog = parse("fn main() -> int { return 0; }")
    result = run_with_tracing(prog, mk_input())
    assert carve(prog, result, CarvePolicy()) == []


def test_carve_requires_trace():
    prog = parse("fn main() -> int { return 0; }")
    from carvelift.vm.interp import run_system
    result = run_system(prog, mk_input())
    with pytest.raises(ValueError):
        carve(prog, result, CarvePolicy())


def test_carve_fidelity_on_subjects():
    rng = Rng(0x51CE)
    for name in SUBJECT_NAMES:
        prog = load_subject(name)
        for _ in range(6):
            sysin = random_input_for(name, rng)
            result = run_with_tracing(prog, sysin)
            for carved in carve(prog, result, CarvePolicy()):
                assert carved.observed_coverage == slice_goals(
                    result.trace, carved.start[1]), (name, carved.start)
                if carved.context.truncated:
                    continue
                rr = replay(prog, carved)
                assert rr.status.kind == "exit", (name, carved.start, rr.status)
                assert rr.coverage == carved.observed_coverage, (name, carved.start)


def test_nested_callee_goals_attributed_to_open_calls():
    prog = parse("""
fn inner(x: int) -> int {
    if (x > 0) { return 1; }
    return 0;
}
fn outer(x: int) -> int {
    return inner(x) + inner(0 - x);
}
fn main() -> int {
    return outer(3);
}
""")
    result = run_with_tracing(prog, mk_input())
    carves = carve(prog, result, CarvePolicy())
    outer_carves = [c for c in carves if c.start[0] == "outer"]
    assert len(outer_carves) == 1
    got = outer_carves[0].observed_coverage
    assert got == slice_goals(result.trace, outer_carves[0].start[1])
    outcomes = {(g.fn, g.outcome) for g in got}
    assert ("inner", "then") in outcomes and ("inner", "else") in outcomes


def test_incomplete_calls_are_skipped():
    prog = parse("""
fn boom(r: ref int) -> int { return r[5]; }
fn main() -> int {
    let a = alloc_array(2, 0);
    return boom(a);
}
""")
    result = run_with_tracing(prog, mk_input())
    assert result.status.is_crash() and result.status.crash_kind == "oob"
    carves, stats = carve_with_stats(prog, result, CarvePolicy())
    assert carves == []
    assert stats.skipped_incomplete == 1


def test_per_function_cap_keeps_earliest_calls():
    prog = parse("""
fn f(x: int) -> int { return x + 1; }
fn main() -> int {
    let i = 0;
    let acc = 0;
    while (i < 20) { acc = f(acc); i = i + 1; }
    return acc;
}
""")
    result = run_with_tracing(prog, mk_input())
    carves, stats = carve_with_stats(prog, result, CarvePolicy(per_fn_cap=8))
    assert len(carves) == 8
    assert stats.skipped_capped == 12
    indices = [c.start[1] for c in carves]
    assert indices == sorted(indices)
    # first call captures acc == 0, so the cap kept the earliest calls
    assert carves[0].context.roots["arg[0]"] == 0
    assert carve(prog, result, CarvePolicy(per_fn_cap=100)) != carves
    assert len(carve(prog, result, CarvePolicy(per_fn_cap=100))) == 20


def test_allowlist_filters_functions():
    prog = parse("""
fn f(x: int) -> int { return x; }
fn g(x: int) -> int { return x; }
fn main() -> int { return f(1) + g(2); }
""")
    result = run_with_tracing(prog, mk_input())
    carves, stats = carve_with_stats(
        prog, result, CarvePolicy(allowlist=frozenset({"g"})))
    assert [c.start[0] for c in carves] == ["g"]
    assert stats.skipped_filtered == 1


def test_input_reading_functions_are_not_carved():
    prog = parse("""
fn peek() -> int { return arg_count(); }
fn wrap() -> int { return peek(); }
fn pure(x: int) -> int { return x; }
fn main() -> int {
    let a = peek();
    let b = wrap();
    return pure(a + b);
}
""")
    result = run_with_tracing(prog, mk_input([b"one"]))
    carves, stats = carve_with_stats(prog, result, CarvePolicy())
    assert [c.start[0] for c in carves] == ["pure"]
    # peek called directly, and again through wrap; wrap itself also skipped
    assert stats.skipped_input_dependent == 3


# ------------------------------------------------------------ snapshots

NODE_BYTES = 8 + 8 + 8  # segment header + int elem + ref elem


def linked_list(n):
    table = {}
    for i in range(n):
        nxt = Ref(i + 1, 0) if i + 1 < n else None
        table[i] = Segment("int", 2, [i, nxt])
    return table


def test_snapshot_no_refs_is_empty():
    got, truncated = snapshot_reachable([7, b"xy", 1.5], {}, 100)
    assert got == {} and truncated is False


def test_snapshot_whole_closure_when_budget_is_large():
    table = linked_list(10)
    got, truncated = snapshot_reachable([Ref(0, 0)], table, 10 * NODE_BYTES)
    assert truncated is False
    assert sorted(got) == list(range(10))
    assert got[9].elems[1] is None


def test_snapshot_budget_cuts_after_four_nodes():
    table = linked_list(10)
    got, truncated = snapshot_reachable([Ref(0, 0)], table, 100)
    assert truncated is True
    assert sorted(got) == [0, 1, 2, 3], (100 // NODE_BYTES)
    # the ref out of the cut is severed, not dangling
    assert got[3].elems[1] is None
    # originals are untouched
    assert table[3].elems[1] == Ref(4, 0)


def test_snapshot_zero_keep_still_truncates():
    table = linked_list(3)
    got, truncated = snapshot_reachable([Ref(0, 0)], table, NODE_BYTES - 1)
    assert got == {} and truncated is True


def test_snapshot_monotone_in_budget():
    table = linked_list(10)
    prev = set()
    for budget in range(8, 11 * NODE_BYTES, 4):
        got, _ = snapshot_reachable([Ref(0, 0)], table, budget)
        assert prev <= set(got), budget
        prev = set(got)
    assert prev == set(range(10))


def test_truncated_context_severs_root_refs():
    prog = load_subject("keycheck")
    result = run_with_tracing(prog, mk_input([b"admin", b"pw"]))
    carves = carve(prog, result, CarvePolicy(max_dump_bytes=8))
    assert carves, "expected carves even under a tiny budget"
    for c in carves:
        assert c.context.truncated is True
        assert c.context.roots["global:db"] is None
        assert c.context.segments == {}


# ------------------------------------------------------------ context model

def test_leaves_enumeration_order_and_paths():
    ctx = Context(
        roots={
            "arg[0]": b"abc",
            "global:g": Ref(0, 0),
        },
        segments={
            0: Segment("record:P", 2, [
                Record("P", {"a": 1, "b": (2.5, b"zz")}),
                Record("P", {"a": 3, "b": (b"q",)}),
            ]),
        },
        truncated=False,
    )
    assert ctx.var() == ("arg[0]", "global:g")
    assert list(ctx.leaves()) == [
        ("arg[0]", b"abc"),
        ("global:g[0].a", 1),
        ("global:g[0].b[0]", 2.5),
        ("global:g[0].b[1]", b"zz"),
        ("global:g[1].a", 3),
        ("global:g[1].b[0]", b"q"),
    ]


def test_leaves_deduplicate_aliased_segments():
    ctx = Context(
        roots={"global:a": Ref(0, 0), "global:b": Ref(0, 0)},
        segments={0: Segment("int", 1, [7])},
        truncated=False,
    )
    assert list(ctx.leaves()) == [("global:a[0]", 7)]


def test_leaves_terminate_on_cycles():
    ctx = Context(
        roots={"global:a": Ref(0, 0)},
        segments={0: Segment("int", 2, [Ref(0, 0), 5])},
        truncated=False,
    )
    assert list(ctx.leaves()) == [("global:a[1]", 5)]


def test_resolve_follows_paths():
    ctx = Context(
        roots={"arg[0]": Ref(1, 0)},
        segments={1: Segment("record:P", 1, [Record("P", {"a": (10, 20)})])},
        truncated=False,
    )
    assert ctx.resolve("arg[0][0].a[1]") == 20
    with pytest.raises(KeyError):
        ctx.resolve("arg[1]")
    with pytest.raises(KeyError):
        ctx.resolve("arg[0][0].missing")


def test_context_to_world_isolates_replays(subjects):
    prog = subjects["keycheck"]
    result = run_with_tracing(prog, mk_input([b"admin", b"opensesame"]))
    carved = next(c for c in carve(prog, result, CarvePolicy())
                  if c.start[0] == "check_user")
    before = dataclasses.replace(carved)
    first = replay(prog, carved)
    second = replay(prog, carved)
    assert carved == before
    assert first.coverage == second.coverage
    assert first.status == second.status


# ------------------------------------------------------------ persistence

def test_keycheck_snapshot_round_trip(tmp_path, subjects):
    prog = subjects["keycheck"]
    result = run_with_tracing(prog, mk_input([b"d7wfv", b"xczZ7tz"]))
    carves = carve(prog, result, CarvePolicy(), origin="seed-0")
    target = next(c for c in carves if c.start[0] == "check_user")
    assert target.context.roots["arg[0]"] == b"d7wfv"
    names = [
        seg.elems[0].fields["name"]
        for seg in target.context.segments.values()
        if seg.elem_type == "record:User"
    ]
    assert names and names[0] == b"admin"

    path = tmp_path / "c.snap"
    save_snapshot(target, path)
    assert load_snapshot(path) == target


def test_random_snapshot_round_trips(tmp_path):
    rng = Rng(0xD1CE)
    seen = 0
    for name in SUBJECT_NAMES:
        prog = load_subject(name)
        for i in range(4):
            result = run_with_tracing(prog, random_input_for(name, rng))
            for j, carved in enumerate(carve(prog, result, CarvePolicy(),
                                             origin=f"{name}-{i}")):
                path = tmp_path / f"{name}-{i}-{j}.snap"
                save_snapshot(carved, path)
                assert load_snapshot(path) == carved
                seen += 1
    assert seen >= 20


def test_snapshot_version_mismatch(tmp_path):
    prog = parse("""
fn f(x: int) -> int { return x; }
fn main() -> int { return f(3); }
""")
    result = run_with_tracing(prog, mk_input())
    carved = carve(prog, result, CarvePolicy())[0]
    path = tmp_path / "c.snap"
    save_snapshot(carved, path)
    import json
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(FormatError):
        load_snapshot(path)
