"""Aggregation helpers and the JSON report envelope shared by all commands."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

from . import __version__


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation; std is 0.0 for fewer than 2 values."""
    vals = list(values)
    if not vals:
        return math.nan, math.nan
    mean = math.fsum(vals) / len(vals)
    if len(vals) < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return mean, math.sqrt(var)


def fmt_pm(mean: float, std: float, digits: int = 3) -> str:
    return f"{mean:.{digits}f} ± {std:.{digits}f}"


def render_table(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    cells = [list(map(str, header))] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = []
    for k, r in enumerate(cells):
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False, ensure_ascii=False)


def options_hash(options: dict) -> str:
    blob = json.dumps(options, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ReportEnvelope:
    """Serializable wrapper around one command's result.

    ``body`` holds the plain-dict form of the result object and ``body_type``
    names it (``RhoEstimate``, ``ValidationReport``, ...). No timestamps are
    recorded, so identical inputs give identical JSON.
    """

    command: str
    inputs: dict
    seeds: list[int]
    body_type: str
    body: dict
    tool_version: str = __version__
    warnings: list[dict] = field(default_factory=list)

    def to_dict(self):
        return {
            "command": self.command,
            "inputs": self.inputs,
            "seeds": list(self.seeds),
            "body_type": self.body_type,
            "body": self.body,
            "tool_version": self.tool_version,
            "warnings": self.warnings,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict()) + "\n"

    @classmethod
    def from_json(cls, text: str) -> ReportEnvelope:
        d = json.loads(text)
        return cls(
            command=d["command"],
            inputs=d["inputs"],
            seeds=d["seeds"],
            body_type=d["body_type"],
            body=d["body"],
            tool_version=d["tool_version"],
            warnings=d.get("warnings", []),
        )
