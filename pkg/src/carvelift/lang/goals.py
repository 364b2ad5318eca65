"""Branch goal enumeration.

A goal is one outcome of one conditional statement.  Every `if` contributes
(then, else) and every `while` contributes (loop-enter, loop-exit), so the
goal count is exactly twice the number of conditional statements.
"""

from __future__ import annotations

from typing import NamedTuple

from .ast import Program, SIf, SWhile, iter_stmts
from .errors import UnknownFunction

OUTCOMES_IF = ("then", "else")
OUTCOMES_WHILE = ("loop-enter", "loop-exit")


class BranchGoal(NamedTuple):
    fn: str
    stmt: int
    outcome: str

    def __str__(self) -> str:
        return f"{self.fn}:{self.stmt}:{self.outcome}"

    @classmethod
    def parse(cls, text: str) -> "BranchGoal":
        fn, stmt, outcome = text.rsplit(":", 2)
        return cls(fn, int(stmt), outcome)


def goals_in_function(program: Program, fn_name: str) -> set[BranchGoal]:
    fn = program.function(fn_name)
    if fn is None:
        raise UnknownFunction(f"no function named {fn_name!r}")
    goals: set[BranchGoal] = set()
    for s in iter_stmts(fn.body):
        if isinstance(s, SIf):
            for outcome in OUTCOMES_IF:
                goals.add(BranchGoal(fn_name, s.stmt_id, outcome))
        elif isinstance(s, SWhile):
            for outcome in OUTCOMES_WHILE:
                goals.add(BranchGoal(fn_name, s.stmt_id, outcome))
    return goals


def enumerate_goals(program: Program) -> set[BranchGoal]:
    """All branch goals of the program: the union over its functions.

    The per-function sets partition this set because statement ids are
    unique program-wide.
    """
    goals: set[BranchGoal] = set()
    for fn in program.functions:
        goals |= goals_in_function(program, fn.name)
    return goals
