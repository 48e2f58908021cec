from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class Check:
    name: str
    ok: bool
    where: dict[str, Any] = field(default_factory=dict)


@dataclass
class Report:
    """Named pass/fail checks with structured locations."""

    title: str = ""
    checks: list[Check] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def add(self, name: str, ok: bool, **where) -> bool:
        where = {k: v for k, v in where.items() if v not in ([], (), None)}
        self.checks.append(Check(name, bool(ok), where))
        return bool(ok)

    def extend(self, other: "Report", prefix: str = "") -> "Report":
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.ok, dict(c.where)))
        self.notes += [prefix + x for x in other.notes]
        return self

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def __bool__(self) -> bool:
        return self.ok

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.ok]

    def get(self, name: str) -> Check | None:
        for c in self.checks:
            if c.name == name:
                return c
        return None

    def passed(self, name: str) -> bool:
        """True when every check called ``name`` (or prefixed by it) passed."""
        hits = [c for c in self.checks if c.name == name or c.name.startswith(name + ".")]
        return bool(hits) and all(c.ok for c in hits)

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "ok": self.ok,
            "checks": [
                {"name": c.name, "ok": c.ok, **({"where": _jsonable(c.where)} if c.where else {})}
                for c in self.checks
            ],
            **({"notes": list(self.notes)} if self.notes else {}),
        }

    def render(self) -> str:
        lines = [f"{self.title}: {'PASS' if self.ok else 'FAIL'}"] if self.title else []
        for c in self.checks:
            loc = ""
            if c.where:
                loc = " (" + ", ".join(f"{k}={v}" for k, v in c.where.items()) + ")"
            lines.append(f"  [{'ok' if c.ok else 'FAIL'}] {c.name}{loc}")
        lines += [f"  note: {x}" for x in self.notes]
        return "\n".join(lines)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, int, float, str)) or x is None:
        return x
    return str(x)


class CheckError(ValueError):
    """Raised when an operation's precondition fails; carries a location."""

    def __init__(self, message: str, **where):
        super().__init__(message)
        self.where = where
