"""Pass/fail records with numeric margins."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field


@dataclass
class Clause:
    description: str
    passed: bool
    margin: float
    values: dict = field(default_factory=dict)


@dataclass
class VerificationReport:
    """Named list of clauses; ``overall`` is their conjunction."""

    name: str
    clauses: list = field(default_factory=list)
    inputs: dict = field(default_factory=dict)

    @property
    def overall(self) -> bool:
        return bool(self.clauses) and all(c.passed for c in self.clauses)

    def add(self, description: str, passed: bool, margin: float, **values) -> Clause:
        clause = Clause(description, bool(passed), float(margin) + 0.0, values)
        self.clauses.append(clause)
        return clause

    def clause(self, prefix: str) -> Clause:
        for c in self.clauses:
            if c.description.startswith(prefix):
                return c
        raise KeyError(prefix)

    def to_text(self) -> str:
        lines = [f"report {self.name} overall={'PASS' if self.overall else 'FAIL'}"]
        for c in self.clauses:
            lines.append(f"{self.name},{'PASS' if c.passed else 'FAIL'},{_fmt(c.margin)},{c.description}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "overall": self.overall,
            "inputs": _jsonable(self.inputs),
            "clauses": [
                {"description": c.description, "pass": c.passed, "margin": _jsonable(c.margin),
                 "values": _jsonable(c.values)}
                for c in self.clauses
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _fmt(x: float) -> str:
    if math.isinf(x) or math.isnan(x):
        return str(x)
    return f"{x:.12g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _jsonable(obj.tolist())
    if isinstance(obj, float) and (math.isinf(obj) or math.isnan(obj)):
        return str(obj)
    return obj
