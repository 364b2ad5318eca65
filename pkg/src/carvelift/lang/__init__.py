from .ast import Program
from .errors import (
    DuplicateDefinition, MiniLangError, MiniSyntaxError, UnknownFunction,
    UnresolvedReference,
)
from .goals import BranchGoal, enumerate_goals, goals_in_function
from .parser import BUILTINS, parse
from .pretty import pretty_print

__all__ = [
    "BUILTINS",
    "BranchGoal",
    "DuplicateDefinition",
    "MiniLangError",
    "MiniSyntaxError",
    "Program",
    "UnknownFunction",
    "UnresolvedReference",
    "enumerate_goals",
    "goals_in_function",
    "parse",
    "pretty_print",
]
