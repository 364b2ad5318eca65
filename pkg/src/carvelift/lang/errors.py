"""Frontend diagnostics."""

from __future__ import annotations

from ..errors import ToolError


class MiniLangError(ToolError):
    """Base for source-level diagnostics. Carries a (line, col) position."""

    def __init__(self, pos, message: str):
        self.pos = pos
        self.message = message
        super().__init__(f"{pos.line}:{pos.col}: {message}")


class MiniSyntaxError(MiniLangError):
    pass


class DuplicateDefinition(MiniLangError):
    pass


class UnresolvedReference(MiniLangError):
    pass


class UnknownFunction(ToolError):
    """Asked about a function the program does not define."""
