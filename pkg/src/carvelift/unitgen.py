"""Parameterized unit testing over carved contexts.

A carve plus its mapping gives a unit test with holes: the mapped leaf
paths.  The fuzzer plugs one new value into one hole per execution,
leaving every other leaf exactly as carved, and keeps the executions
that crash or that cover goals nobody has covered yet.

Value streams interleave their generator families round-robin, so the
cheap high-yield families (the int constants, values harvested from the
carved context itself) land within the first few executions even under
tiny budgets.  Harvesting is the stand-in for a constraint solver here:
the interesting comparison constants are usually sitting in the context,
carved out of the program's own state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .carving import CarvedTest, Context, context_to_world, parse_path
from .errors import ToolError
from .lang.ast import Program
from .lang.goals import BranchGoal
from .mapping import Mapping, hrvar
from .rng import Rng
from .vm.interp import RunOptions, RunStatus, TypeMismatch, call_function
from .vm.values import INT64_MAX, INT64_MIN, Record, Ref, wrap64


class NoParameters(ToolError):
    """The mapping marked no leaf as a parameter; skip this carve."""


class UnknownParameter(ToolError):
    """An assignment names a path the context does not contain."""


@dataclass(frozen=True)
class ParamAssignment:
    assignments: dict[str, object]
    provenance: str


@dataclass
class UnitOutcome:
    assignment: ParamAssignment
    status: RunStatus
    new_goals: frozenset[BranchGoal]
    crashed: bool


@dataclass
class FuzzStats:
    executions: int = 0
    steps: int = 0
    wall_times_s: list[float] = field(default_factory=list)


# ---------------------------------------------------------------- streams

def _round_robin(streams):
    active = list(streams)
    while active:
        keep = []
        for gen in active:
            try:
                yield next(gen)
            except StopIteration:
                continue
            keep.append(gen)
        active = keep


def int_mutations(v: int, rng: Rng):
    """Labeled stream of replacement ints: constants, bit flips, random."""

    def constants():
        yield "int-constant", 0
        yield "int-constant", INT64_MAX
        yield "int-constant", INT64_MIN

    def bitflips():
        while True:
            yield "int-bitflip", wrap64(v ^ (1 << rng.randrange(64)))

    def randoms():
        while True:
            yield "int-random", wrap64(rng.next_u64())

    yield from _round_robin([constants(), bitflips(), randoms()])


def bytes_mutations(v: bytes, ctx: Context, rng: Rng):
    """Labeled stream of replacement byte strings.

    Families: values harvested from the context (each once), bit flips
    of v, random bytes, random printable ASCII, NUL runs, 0xFF runs, and
    repeated substrings of v.  Lengths orbit the original value's.
    """
    lengths = sorted({n for n in (1, len(v), len(v) - 1, len(v) + 1, 2 * len(v))
                      if n >= 1})

    def harvested():
        seen = set()
        for _, leaf in ctx.leaves():
            if isinstance(leaf, bytes):
                data = leaf
            elif isinstance(leaf, int):
                data = str(leaf).encode("ascii")
            else:
                continue
            if data not in seen:
                seen.add(data)
                yield "harvested", data

    def bitflips():
        if not v:
            return
        while True:
            i = rng.randrange(len(v))
            flipped = v[i] ^ (1 << rng.randrange(8))
            yield "bytes-bitflip", v[:i] + bytes([flipped]) + v[i + 1:]

    def rand_bytes():
        while True:
            yield "bytes-random", rng.randbytes(rng.choice(lengths))

    def rand_ascii():
        while True:
            n = rng.choice(lengths)
            yield "bytes-ascii", bytes(rng.randint(32, 126) for _ in range(n))

    def nul_runs():
        while True:
            yield "bytes-nul", b"\x00" * rng.choice(lengths)

    def ff_runs():
        while True:
            yield "bytes-ff", b"\xff" * rng.choice(lengths)

    def repeats():
        if not v:
            return
        while True:
            a = rng.randrange(len(v))
            b = a + 1 + rng.randrange(len(v) - a)
            yield "bytes-repeat", v[a:b] * rng.randint(2, 4)

    yield from _round_robin([
        harvested(), bitflips(), rand_bytes(), rand_ascii(),
        nul_runs(), ff_runs(), repeats(),
    ])


# ---------------------------------------------------------------- assignment

def _updated(value, steps, new_value, segments):
    """Rebuild a value along an access path; segment stores mutate in place."""
    if not steps:
        return new_value
    (kind, key), rest = steps[0], steps[1:]
    if kind == "index":
        if isinstance(value, Ref):
            seg = segments[value.seg]
            idx = value.off + key
            seg.elems[idx] = _updated(seg.elems[idx], rest, new_value, segments)
            return value
        items = list(value)
        items[key] = _updated(items[key], rest, new_value, segments)
        return tuple(items)
    return value.with_field(
        key, _updated(value.fields[key], rest, new_value, segments))


def apply_assignment(c: CarvedTest, a: ParamAssignment):
    """A fresh (args, world) equal to the carve except at assigned leaves."""
    args, (globals_, segments) = context_to_world(c.context)
    for path in sorted(a.assignments):
        new_value = a.assignments[path]
        try:
            old = c.context.resolve(path)
        except KeyError:
            raise UnknownParameter(path) from None
        if isinstance(old, bytes):
            if not isinstance(new_value, bytes):
                raise TypeMismatch(f"{path} holds bytes, assignment is not")
        elif isinstance(old, int):
            if not isinstance(new_value, int) or isinstance(new_value, bool):
                raise TypeMismatch(f"{path} holds an int, assignment is not")
            new_value = wrap64(new_value)
        else:
            raise TypeMismatch(f"{path}: only bytes and int leaves take assignments")
        root, steps = parse_path(path)
        if root.startswith("arg["):
            idx = int(root[4:-1])
            args[idx] = _updated(args[idx], steps, new_value, segments)
        else:
            name = root[len("global:"):]
            globals_[name] = _updated(globals_[name], steps, new_value, segments)
    return args, (globals_, segments)


# ---------------------------------------------------------------- fuzzing

def fuzz_unit_with_stats(program: Program, c: CarvedTest, m: Mapping,
                         budget: int, cov, rng: Rng,
                         opts: RunOptions = RunOptions()):
    """Run up to `budget` single-parameter variations of a carved call.

    `cov` is the goal set already discovered (a CoverageMap or a plain
    set); only executions that crash or reach beyond it are returned.
    Each returned crash signature appears once per batch.  Unit runs get
    a tenth of the system step budget.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    params = hrvar(m)
    if not params:
        raise NoParameters(f"{c.start[0]}: no leaf maps into the input")

    streams = []
    for path in params:
        leaf = c.context.resolve(path)
        child = rng.split()
        if isinstance(leaf, bytes):
            streams.append((path, bytes_mutations(leaf, c.context, child)))
        else:
            streams.append((path, int_mutations(leaf, child)))

    working = set(getattr(cov, "discovered", cov))
    unit_opts = opts.unit()
    stats = FuzzStats()
    outcomes: list[UnitOutcome] = []
    crash_signatures: set[tuple] = set()
    for k in range(budget):
        path, gen = streams[k % len(streams)]
        label, value = next(gen)
        assignment = ParamAssignment({path: value}, label)
        args, world = apply_assignment(c, assignment)
        r = call_function(program, c.start[0], args, world, unit_opts)
        stats.executions += 1
        stats.steps += r.steps
        stats.wall_times_s.append(r.wall_time_s)

        new_goals = frozenset(r.coverage - working)
        working |= r.coverage
        keep = bool(new_goals)
        if r.status.is_crash():
            signature = (r.status.crash_kind, r.status.crash_fn,
                         r.status.crash_stmt)
            if signature not in crash_signatures:
                crash_signatures.add(signature)
                keep = True
        if keep:
            outcomes.append(UnitOutcome(
                assignment, r.status, new_goals, r.status.is_crash()))
    return outcomes, stats


def fuzz_unit(program: Program, c: CarvedTest, m: Mapping, budget: int,
              cov, rng: Rng, opts: RunOptions = RunOptions()) -> list[UnitOutcome]:
    return fuzz_unit_with_stats(program, c, m, budget, cov, rng, opts)[0]
