"""Unit-level fuzzing tests.

Soundness oracle: every winner is re-executed from scratch and must
reproduce its recorded status; its new goals must be inside the replay's
coverage.
"""

import pytest

from carvelift.carving import CarvePolicy, CarvedTest, Context, carve, context_to_world
from carvelift.mapping import MapOptions, build_mapping
from carvelift.rng import Rng
from carvelift.unitgen import (
    NoParameters, UnknownParameter, ParamAssignment, apply_assignment,
    bytes_mutations, fuzz_unit, fuzz_unit_with_stats, int_mutations,
)
from carvelift.vm.interp import RunOptions, TypeMismatch, call_function, run_with_tracing
from carvelift.vm.values import INT64_MAX, INT64_MIN, Record, Ref, Segment

from conftest import load_subject, mk_input


def bare_carve(roots, segments=None, start=("f", 1)):
    return CarvedTest(start, Context(roots, segments or {}, False),
                      "test", frozenset())


def take(stream, n):
    return [next(stream) for _ in range(n)]


# ------------------------------------------------------------ int streams

def test_int_constants_appear_exactly_once():
    got = take(int_mutations(5, Rng(3)), 300)
    constants = [v for label, v in got if label == "int-constant"]
    assert constants == [0, INT64_MAX, INT64_MIN]


def test_int_stream_for_zero_still_yields_extremes():
    got = take(int_mutations(0, Rng(3)), 12)
    values = [v for _, v in got]
    assert INT64_MAX in values and INT64_MIN in values


def test_int_bitflips_flip_single_bits():
    got = take(int_mutations(1, Rng(9)), 400)
    flips = {v for label, v in got if label == "int-bitflip"}
    assert 0 in flips  # bit 0 of 1 cleared
    assert all(bin((v ^ 1) % (1 << 64)).count("1") == 1 for v in flips)


def test_int_stream_reproducible():
    a = take(int_mutations(42, Rng(7)), 200)
    b = take(int_mutations(42, Rng(7)), 200)
    assert a == b


def test_int_stream_stays_in_64_bit_range():
    for _, v in take(int_mutations(INT64_MIN, Rng(1)), 500):
        assert INT64_MIN <= v <= INT64_MAX


# ------------------------------------------------------------ bytes streams

def empty_ctx():
    return Context({}, {}, False)


def test_bytes_stream_total_on_empty_value():
    got = take(bytes_mutations(b"", empty_ctx(), Rng(2)), 50)
    assert all(isinstance(v, bytes) and len(v) >= 1 for _, v in got)
    families = {label for label, _ in got}
    assert {"bytes-random", "bytes-ascii", "bytes-nul", "bytes-ff"} <= families


def test_harvested_values_lead_the_stream():
    ctx = Context(
        {"arg[0]": b"d7wfv", "global:db": Ref(0, 0)},
        {0: Segment("record:U", 1,
                    [Record("U", {"name": b"admin", "hash": 1234567})])},
        False)
    got = take(bytes_mutations(b"d7wfv", ctx, Rng(4)), 40)
    harvested = [v for label, v in got if label == "harvested"]
    assert got[0][0] == "harvested"
    assert b"admin" in harvested
    assert b"d7wfv" in harvested
    assert b"1234567" in harvested  # int leaves harvest as decimal text
    assert harvested.count(b"admin") == 1


def test_repetition_produces_doubled_substrings():
    got = take(bytes_mutations(b"ab", empty_ctx(), Rng(0)), 400)
    reps = {v for label, v in got if label == "bytes-repeat"}
    assert b"abab" in reps


def test_nul_and_ff_run_lengths_follow_the_value():
    got = take(bytes_mutations(b"abcde", empty_ctx(), Rng(6)), 300)
    nuls = {len(v) for label, v in got if label == "bytes-nul"}
    assert nuls <= {1, 4, 5, 6, 10}
    assert nuls & {5, 10}


def test_bytes_stream_reproducible():
    ctx = Context({"arg[0]": b"seed"}, {}, False)
    a = take(bytes_mutations(b"seed", ctx, Rng(11)), 200)
    b = take(bytes_mutations(b"seed", ctx, Rng(11)), 200)
    assert a == b


# ------------------------------------------------------------ assignments

def test_empty_assignment_is_identity():
    carved = bare_carve(
        {"arg[0]": b"abc", "global:n": 7, "global:p": Ref(0, 0)},
        {0: Segment("int", 2, [1, 2])})
    args, (globals_, segments) = apply_assignment(
        carved, ParamAssignment({}, "none"))
    base_args, (base_globals, base_segments) = context_to_world(carved.context)
    assert args == base_args
    assert globals_ == base_globals
    assert segments == base_segments


def test_assignment_replaces_only_the_target_leaf():
    carved = bare_carve({"arg[0]": b"d7wfv", "arg[1]": 4, "global:t": b"x"})
    args, (globals_, _) = apply_assignment(
        carved, ParamAssignment({"arg[0]": b"admin"}, "harvested"))
    assert args == [b"admin", 4]
    assert globals_ == {"t": b"x"}
    assert carved.context.roots["arg[0]"] == b"d7wfv"  # original untouched


def test_assignment_reaches_into_segments():
    carved = bare_carve(
        {"global:db": Ref(3, 0)},
        {3: Segment("record:U", 2, [
            Record("U", {"name": b"admin", "h": 1}),
            Record("U", {"name": b"guest", "h": 2}),
        ])})
    _, (_, segments) = apply_assignment(
        carved, ParamAssignment({"global:db[1].name": b"evil"}, "test"))
    assert segments[3].elems[1].fields["name"] == b"evil"
    assert segments[3].elems[0].fields["name"] == b"admin"
    assert carved.context.segments[3].elems[1].fields["name"] == b"guest"


def test_assignment_rejects_unknown_paths_and_wrong_types():
    carved = bare_carve({"arg[0]": b"abc"})
    with pytest.raises(UnknownParameter):
        apply_assignment(carved, ParamAssignment({"arg[5]": b"x"}, "t"))
    with pytest.raises(TypeMismatch):
        apply_assignment(carved, ParamAssignment({"arg[0]": 9}, "t"))


# ------------------------------------------------------------ fuzz_unit

HARVEST_PROG = """
global key: bytes = "SECRET99";

fn check(a: bytes, b: bytes) -> int {
    let r = 0;
    if (a == key) { r = r + 1; }
    if (b == key) { r = r + 2; }
    return r;
}

fn main() -> int {
    return check(arg(0), arg(1));
}
"""


def harvest_setup():
    from carvelift.lang.parser import parse
    prog = parse(HARVEST_PROG)
    s = mk_input((b"aaa", b"bbb"))
    result = run_with_tracing(prog, s)
    carved = carve(prog, result, CarvePolicy())[0]
    mapping = build_mapping(carved, s, MapOptions())
    assert set(mapping.parameters) == {"arg[0]", "arg[1]"}
    return prog, result, carved, mapping


def test_fuzz_unit_finds_goals_for_every_parameter():
    prog, result, carved, mapping = harvest_setup()
    winners = fuzz_unit(prog, carved, mapping, 60, result.coverage, Rng(21))
    hit_paths = set()
    for w in winners:
        assert not w.crashed
        assert w.new_goals
        hit_paths.update(w.assignment.assignments)
    # the harvested global key unlocks the branch behind each parameter
    assert hit_paths == {"arg[0]", "arg[1]"}


def test_fuzz_unit_winners_replay_exactly():
    prog, result, carved, mapping = harvest_setup()
    winners = fuzz_unit(prog, carved, mapping, 60, result.coverage, Rng(21))
    assert winners
    for w in winners:
        args, world = apply_assignment(carved, w.assignment)
        rr = call_function(prog, carved.start[0], args, world,
                           RunOptions().unit())
        assert rr.status == w.status
        assert w.new_goals <= rr.coverage


def test_fuzz_unit_respects_budget_and_leaves_the_carve_alone():
    import copy
    prog, result, carved, mapping = harvest_setup()
    before = copy.deepcopy(carved)
    winners, stats = fuzz_unit_with_stats(
        prog, carved, mapping, 37, result.coverage, Rng(5))
    assert stats.executions == 37
    assert stats.steps > 0
    assert len(stats.wall_times_s) == 37
    assert carved == before
    assert len(winners) <= 37


def test_fuzz_unit_requires_parameters():
    from carvelift.lang.parser import parse
    prog = parse("""
fn f(x: int) -> int { return x; }
fn main() -> int { return f(1); }
""")
    s = mk_input()
    result = run_with_tracing(prog, s)
    carved = carve(prog, result, CarvePolicy())[0]
    mapping = build_mapping(carved, s, MapOptions())
    assert mapping.parameters == frozenset()
    with pytest.raises(NoParameters):
        fuzz_unit(prog, carved, mapping, 10, result.coverage, Rng(1))


def test_fuzz_unit_reports_nothing_when_nothing_new_is_reachable():
    from carvelift.lang.parser import parse
    prog = parse("""
fn same(x: bytes) -> int {
    if (1) { return 7; }
    return 0;
}
fn main() -> int { return same(arg(0)); }
""")
    s = mk_input((b"tok",))
    result = run_with_tracing(prog, s)
    carved = carve(prog, result, CarvePolicy())[0]
    mapping = build_mapping(carved, s, MapOptions())
    winners = fuzz_unit(prog, carved, mapping, 50, result.coverage, Rng(2))
    assert winners == []


def test_fuzz_unit_discovers_admin_on_keycheck():
    prog = load_subject("keycheck")
    s = mk_input((b"d7wfv", b"xczZ7tz"))
    result = run_with_tracing(prog, s)
    carved = next(c for c in carve(prog, result, CarvePolicy())
                  if c.start[0] == "check_user")
    mapping = build_mapping(carved, s, MapOptions())
    winners = fuzz_unit(prog, carved, mapping, 200, result.coverage, Rng(0))
    values = {w.assignment.assignments["arg[0]"] for w in winners}
    assert b"admin" in values
