"""Campaign orchestration.

Drives the end-to-end loop: execute seeds with carving, expand them
with mutated system inputs, then repeatedly pick the carve whose
function has the most uncovered branch goals, fuzz it at unit level,
and lift the winners back to validated system inputs.  The system-only
mode runs the same input generator without any carving or lifting as a
baseline.

Two guards keep the loop from stalling on unit-only discoveries: goals
whose lifts validated false-positive are not chased again, and a
function whose rounds go winnerless FUTILE_ROUNDS times in a row drops
out of selection, handing the budget back to system-level batches.

Budgets are charged on one of two clocks: wall time for real runs, or
an exact count of VM steps (every system and unit execution included)
for reproducible runs.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import asdict, dataclass, field

from .carving import CarvePolicy, CarveStats, CarvedTest, carve_with_stats
from .errors import ConfigError
from .lang.goals import BranchGoal, enumerate_goals, goals_in_function
from .lifting import UnmappedParameter, lift, validate
from .mapping import build_mapping, MapOptions
from .reporting import (
    REPORT_VERSION,
    CampaignReport,
    EffectiveInput,
    FunctionRow,
    LiftStats,
    SpeedupStats,
)
from .rng import Rng
from .sysgen import generate_batch, mutate_input, write_corpus
from .unitgen import fuzz_unit_with_stats
from .vm.interp import RunOptions, TraceOverflow, run_system, run_with_tracing

MODES = ("bridge", "system-only")
FALLBACK_BATCH = 10
# A function whose fuzz rounds come back winnerless this many times in a
# row stops being selected; its goals stay reachable through system runs.
FUTILE_ROUNDS = 3


class CoverageMap:
    """Discovered branch goals plus the first-discovery log.

    The log keeps (elapsed, goal, source) triples in discovery order;
    sources are system-seed, system-gen, or lift.
    """

    def __init__(self):
        self.discovered: set[BranchGoal] = set()
        self.log: list[tuple[float, BranchGoal, str]] = []

    def record(self, goal: BranchGoal, elapsed: float, source: str) -> bool:
        if goal in self.discovered:
            return False
        self.discovered.add(goal)
        self.log.append((elapsed, goal, source))
        return True


class WallClock:
    def __init__(self):
        self._t0 = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._t0

    def charge(self, result) -> None:
        pass

    def charge_steps(self, steps: int) -> None:
        pass


class StepClock:
    """Deterministic budget clock: elapsed = VM steps executed."""

    def __init__(self):
        self.steps = 0

    def now(self) -> float:
        return float(self.steps)

    def charge(self, result) -> None:
        self.steps += result.steps

    def charge_steps(self, steps: int) -> None:
        self.steps += steps


@dataclass
class SelectionState:
    counts: dict[str, int] = field(default_factory=dict)
    skipped: set[str] = field(default_factory=set)

    def skip(self, fn: str) -> None:
        self.skipped.add(fn)


def select_next(pool: list[CarvedTest], cov, program,
                state: SelectionState | None = None) -> CarvedTest | None:
    """Pick a carve of the function with the most uncovered goals.

    Ties break toward the function selected fewer times, then the
    lexicographically smaller name.  Within a function the carves
    rotate with the selection count.  Returns None when no pool
    function has uncovered goals.
    """
    state = state if state is not None else SelectionState()
    discovered = set(getattr(cov, "discovered", cov))
    by_fn: dict[str, list[CarvedTest]] = {}
    for c in pool:
        fn = c.start[0]
        if fn not in state.skipped:
            by_fn.setdefault(fn, []).append(c)
    best_key = None
    best_fn = None
    for fn, entries in by_fn.items():
        uncovered = len(goals_in_function(program, fn) - discovered)
        if uncovered == 0:
            continue
        key = (-uncovered, state.counts.get(fn, 0), fn)
        if best_key is None or key < best_key:
            best_key, best_fn = key, fn
    if best_fn is None:
        return None
    entries = by_fn[best_fn]
    prior = state.counts.get(best_fn, 0)
    state.counts[best_fn] = prior + 1
    return entries[prior % len(entries)]


@dataclass(frozen=True)
class RunConfig:
    mode: str = "bridge"
    budget: float = 60.0            # wall seconds, unless the step clock is on
    n_per_seed: int = 10
    unit_budget: int = 200
    rng_seed: int = 0
    deterministic_clock: int | None = None   # step budget; replaces wall budget
    max_dump_bytes: int = 65536
    per_fn_cap: int = 8
    min_match_len: int = 3
    first_occurrence_only: bool = False
    recarve_effective: bool = True
    corpus_out: str | None = None
    step_limit: int = 5_000_000
    trace_limit: int = 500_000


def _check(cfg: RunConfig, seeds) -> None:
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {cfg.mode!r}")
    if cfg.deterministic_clock is None:
        if cfg.budget <= 0:
            raise ConfigError("wall budget must be positive")
    elif cfg.deterministic_clock <= 0:
        raise ConfigError("step budget must be positive")
    if cfg.n_per_seed < 1:
        raise ConfigError("n_per_seed must be at least 1")
    if cfg.unit_budget < 1:
        raise ConfigError("unit_budget must be at least 1")
    if not seeds:
        raise ConfigError("at least one seed input is required")


class _Campaign:
    def __init__(self, program, seeds, cfg: RunConfig, program_name: str):
        self.program = program
        self.seeds = list(seeds)
        self.cfg = cfg
        self.program_name = program_name
        self.opts = RunOptions(step_limit=cfg.step_limit,
                               trace_limit=cfg.trace_limit)
        self.policy = CarvePolicy(max_dump_bytes=cfg.max_dump_bytes,
                                  per_fn_cap=cfg.per_fn_cap)
        self.map_opts = MapOptions(min_match_len=cfg.min_match_len)
        self.clock = (StepClock() if cfg.deterministic_clock is not None
                      else WallClock())
        self.budget = float(cfg.deterministic_clock
                            if cfg.deterministic_clock is not None
                            else cfg.budget)
        rng = Rng(cfg.rng_seed)
        self.rng_gen = rng.split()
        self.rng_unit = rng.split()

        self.all_goals = enumerate_goals(program)
        self.cov = CoverageMap()
        self.state = SelectionState()
        # Goals whose lifts validated false-positive: unit-reachable but
        # (apparently) not system-reachable.  Fuzzing stops chasing them.
        self.fp_goals: set[BranchGoal] = set()
        self.futile: dict[str, int] = {}
        self.pool: list[CarvedTest] = []
        self.origins: dict[str, object] = {}
        self.series: list[tuple[float, float]] = []
        self.carve_totals: dict[str, int] = {
            k: 0 for k in asdict(CarveStats())}
        self.carves_by_fn: dict[str, int] = {}
        self.parameterized_fns: set[str] = set()
        self.sys_walls: list[float] = []
        self.unit_walls: list[float] = []
        self.wall_sys_total = 0.0
        self.n_sys_execs = 0
        self.n_unit_execs = 0
        self.n_unit_winners = 0
        self.n_lift_attempts = 0
        self.n_effective = 0
        self.n_other_goal = 0
        self.n_false_positive = 0
        self.effective: list[tuple[object, tuple[str, ...], str | None]] = []
        self._gen_i = 0
        self._lift_i = 0
        self._rr_seed = 0

    # -- budget helpers

    def exhausted(self) -> bool:
        return self.clock.now() >= self.budget

    def uncovered(self) -> bool:
        return bool(self.all_goals - self.cov.discovered)

    def fraction(self) -> float:
        if not self.all_goals:
            return 1.0
        return len(self.cov.discovered) / len(self.all_goals)

    def point(self) -> None:
        self.series.append((self.clock.now(), self.fraction()))

    # -- execution

    def run_one(self, s, origin_id: str, source: str, traced: bool):
        result = None
        if traced:
            try:
                result = run_with_tracing(self.program, s, self.opts)
            except TraceOverflow:
                result = None   # too chatty to carve; coverage still counts
        if result is None:
            result = run_system(self.program, s, self.opts)
        self.clock.charge(result)
        self.n_sys_execs += 1
        self.sys_walls.append(result.wall_time_s)
        self.wall_sys_total += result.wall_time_s
        for g in sorted(result.coverage - self.cov.discovered, key=str):
            self.cov.record(g, self.clock.now(), source)
        self.point()
        if traced and result.trace is not None:
            carves, stats = carve_with_stats(self.program, result,
                                             self.policy, origin=origin_id)
            self.origins[origin_id] = s
            self.pool.extend(carves)
            for k, v in asdict(stats).items():
                self.carve_totals[k] += v
            for c in carves:
                fn = c.start[0]
                self.carves_by_fn[fn] = self.carves_by_fn.get(fn, 0) + 1
        return result

    def gen_id(self) -> str:
        self._gen_i += 1
        return f"gen-{self._gen_i - 1}"

    def system_batch(self, traced: bool) -> None:
        batch = []
        for _ in range(FALLBACK_BATCH):
            base = self.seeds[self._rr_seed % len(self.seeds)]
            self._rr_seed += 1
            batch.append(mutate_input(base, self.rng_gen))
        for s in batch:
            if self.exhausted() or not self.uncovered():
                return
            self.run_one(s, self.gen_id(), "system-gen", traced)

    # -- bridge loop

    def fuzz_round(self, sel: CarvedTest) -> None:
        fn = sel.start[0]
        origin = self.origins[sel.origin]
        m = build_mapping(sel, origin, self.map_opts)
        if not m.parameters:
            self.state.skip(fn)
            return
        self.parameterized_fns.add(fn)
        winners, fstats = fuzz_unit_with_stats(
            self.program, sel, m, self.cfg.unit_budget,
            self.cov.discovered | self.fp_goals,
            self.rng_unit.split(), self.opts)
        self.clock.charge_steps(fstats.steps)
        self.unit_walls.extend(fstats.wall_times_s)
        self.n_unit_execs += fstats.executions
        self.n_unit_winners += len(winners)
        self.point()
        if winners:
            self.futile[fn] = 0
        else:
            self.futile[fn] = self.futile.get(fn, 0) + 1
            if self.futile[fn] >= FUTILE_ROUNDS:
                self.state.skip(fn)
        for w in winners:
            if self.exhausted():
                return
            unit_crash = ((w.status.crash_kind, w.status.crash_fn)
                          if w.crashed else None)
            try:
                lifted = lift(m, w.assignment, origin,
                              self.cfg.first_occurrence_only)
            except UnmappedParameter:
                continue
            self.n_lift_attempts += 1
            out = validate(self.program, lifted, w.new_goals, self.cov,
                           unit_crash, elapsed=self.clock.now(),
                           opts=self.opts)
            self.clock.charge_steps(out.steps)
            self.n_sys_execs += 1
            self.sys_walls.append(out.wall_time_s)
            self.wall_sys_total += out.wall_time_s
            self.point()
            if out.classification == "effective":
                self.n_effective += 1
                crash = None
                if out.status.is_crash():
                    crash = f"{out.status.crash_kind}@{out.status.crash_fn}"
                self.effective.append(
                    (lifted.input,
                     tuple(sorted(str(g) for g in out.discovered)), crash))
                if self.cfg.recarve_effective and not self.exhausted():
                    self._lift_i += 1
                    self.run_one(lifted.input, f"lift-{self._lift_i - 1}",
                                 "system-gen", traced=True)
            elif out.classification == "other-goal":
                self.n_other_goal += 1
            else:
                self.n_false_positive += 1
                self.fp_goals |= w.new_goals

    def run_bridge(self) -> None:
        for i, s in enumerate(self.seeds):
            if self.exhausted():
                return
            self.run_one(s, f"seed-{i}", "system-seed", traced=True)
        for s in generate_batch(self.seeds, self.cfg.n_per_seed, self.rng_gen):
            if self.exhausted() or not self.uncovered():
                break
            self.run_one(s, self.gen_id(), "system-gen", traced=True)
        while not self.exhausted() and self.uncovered():
            sel = select_next(self.pool, self.cov, self.program, self.state)
            if sel is None:
                self.system_batch(traced=True)
                continue
            self.fuzz_round(sel)

    def run_system_only(self) -> None:
        for i, s in enumerate(self.seeds):
            if self.exhausted():
                return
            self.run_one(s, f"seed-{i}", "system-seed", traced=False)
        while not self.exhausted() and self.uncovered():
            self.system_batch(traced=False)

    # -- report assembly

    def report(self, wall_start: float) -> CampaignReport:
        cfg = self.cfg
        paths: list[str | None] = [None] * len(self.effective)
        if cfg.corpus_out is not None and self.effective:
            written = write_corpus(cfg.corpus_out,
                                   [s for s, _, _ in self.effective])
            paths = [str(p) for p in written]
        eff = tuple(
            EffectiveInput(argv=s.argv, stdin=s.stdin, goals=goals,
                           crash=crash, corpus_path=paths[i])
            for i, (s, goals, crash) in enumerate(self.effective))
        rows = []
        for fn in sorted(f.name for f in self.program.functions
                         if f.name != "main"):
            fgoals = goals_in_function(self.program, fn)
            rows.append(FunctionRow(
                name=fn,
                goals=len(fgoals),
                covered=len(fgoals & self.cov.discovered),
                carves=self.carves_by_fn.get(fn, 0),
                selections=self.state.counts.get(fn, 0),
                parameterized=fn in self.parameterized_fns,
                skipped=fn in self.state.skipped,
            ))
        med_sys = statistics.median(self.sys_walls) if self.sys_walls else 0.0
        med_unit = (statistics.median(self.unit_walls)
                    if self.unit_walls else 0.0)
        speedup = med_sys / med_unit if med_sys > 0 and med_unit > 0 else 0.0
        return CampaignReport(
            version=REPORT_VERSION,
            program=self.program_name,
            mode=cfg.mode,
            rng_seed=cfg.rng_seed,
            config=asdict(cfg),
            total_goals=len(self.all_goals),
            discovered=len(self.cov.discovered),
            coverage_series=tuple(self.series),
            first_discovery=tuple((e, str(g), src)
                                  for e, g, src in self.cov.log),
            functions=tuple(rows),
            carve_stats=dict(self.carve_totals),
            lift_stats=LiftStats(
                unit_executions=self.n_unit_execs,
                unit_winners=self.n_unit_winners,
                lift_attempts=self.n_lift_attempts,
                effective=self.n_effective,
                other_goal=self.n_other_goal,
                false_positive=self.n_false_positive),
            speedup=SpeedupStats(
                system_executions=self.n_sys_execs,
                unit_executions=self.n_unit_execs,
                median_system_ms=med_sys * 1000.0,
                median_unit_ms=med_unit * 1000.0,
                speedup=speedup),
            effective_inputs=eff,
            total_wall_s=time.monotonic() - wall_start,
            budget_used=self.clock.now(),
            system_wall_total_s=self.wall_sys_total,
        )


def run_campaign(program, seeds, cfg: RunConfig,
                 program_name: str = "program") -> CampaignReport:
    _check(cfg, seeds)
    wall_start = time.monotonic()
    c = _Campaign(program, seeds, cfg, program_name)
    if cfg.mode == "bridge":
        c.run_bridge()
    else:
        c.run_system_only()
    return c.report(wall_start)
