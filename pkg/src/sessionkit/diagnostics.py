"""Error types and the violation report shared by all checking stages."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .model import Pos


class SourceError(Exception):
    """An error tied to a place in the input text."""

    def __init__(self, message: str, pos: Optional[Pos] = None):
        super().__init__(message)
        self.message = message
        self.pos = pos

    @property
    def line(self) -> Optional[int]:
        return self.pos.line if self.pos else None

    def render(self, filename: str = "<input>") -> str:
        if self.pos is None:
            return f"{filename}: {self.message}"
        return f"{filename}:{self.pos.line}:{self.pos.col}: {self.message}"


class SyntaxError_(SourceError):
    def __init__(self, pos: Pos, expected: str, found: str):
        super().__init__(f"syntax error: expected {expected}, found {found}", pos)
        self.expected = expected
        self.found = found


class SortError(SourceError):
    def __init__(self, pos: Optional[Pos], expected: str, found: str, what: str = ""):
        detail = f" in {what}" if what else ""
        super().__init__(f"sort error{detail}: expected {expected}, found {found}", pos)
        self.expected = expected
        self.found = found


class DuplicateLabel(SourceError):
    def __init__(self, pos: Optional[Pos], label: str):
        super().__init__(f"duplicate label '{label}'", pos)
        self.label = label


class UnknownRecursionVariable(SourceError):
    def __init__(self, pos: Optional[Pos], var: str):
        super().__init__(f"unknown recursion variable '{var}'", pos)
        self.var = var


class WellFormednessError(SourceError):
    """Structural problems that are neither syntax nor sort errors."""


class TypingError(SourceError):
    """Base class for failures of participant type inference."""

    kind = "Typing"


class TypingSendUnsat(TypingError):
    kind = "Typing-Send"

    def __init__(self, context: str, instance: str, pos: Optional[Pos] = None):
        super().__init__(f"[Typing-Send] Assertion not satisfiable: {context} => {instance}", pos)
        self.context = context
        self.instance = instance


class TypingRecInvariant(TypingError):
    kind = "Typing-Rec"

    def __init__(self, context: str, instance: str, pos: Optional[Pos] = None):
        super().__init__(f"[Typing-Rec] Invariant not satisfied: {context} => {instance}", pos)


class UnknownBranchGroup(TypingError):
    kind = "Typing-Select"

    def __init__(self, branch_id: str, pos: Optional[Pos] = None, detail: str = ""):
        msg = f"unknown branch group '{branch_id}'"
        super().__init__(msg + (f": {detail}" if detail else ""), pos)
        self.branch_id = branch_id


class ChannelNotInScope(TypingError):
    def __init__(self, channel: str, pos: Optional[Pos] = None):
        super().__init__(f"channel '{channel}' is not in scope", pos)
        self.channel = channel


class ArityMismatch(TypingError):
    pass


class SortMismatchError(TypingError):
    pass


class BranchMismatch(TypingError):
    """Conditional or branch arms whose session types cannot be reconciled."""


class UnmergeableBranches(Exception):
    def __init__(self, participant: str, path: str):
        super().__init__(f"branches are not mergeable for {participant} at {path}")
        self.participant = participant
        self.path = path


class NonLinearAtom(Exception):
    pass


class ResourceExhausted(Exception):
    """The decision procedure ran past its step budget."""


@dataclass
class Violation:
    kind: str
    path: str
    message: str
    line: Optional[int] = None
    details: dict = field(default_factory=dict)

    def render(self) -> str:
        where = self.path or "root"
        if self.line is not None:
            where += f" (line {self.line})"
        return f"{self.kind} at {where}: {self.message}"

    def to_json(self) -> dict:
        out = {"kind": self.kind, "path": self.path, "message": self.message, "line": self.line}
        if self.details:
            out["details"] = self.details
        return out


@dataclass
class CheckReport:
    violations: list = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "ok" if not self.violations else "failed"

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind: str, path: str, message: str, line: Optional[int] = None, **details) -> None:
        self.violations.append(Violation(kind, path, message, line, details))

    def extend(self, other: "CheckReport") -> None:
        self.violations.extend(other.violations)

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "violations": [v.to_json() for v in self.violations]}
