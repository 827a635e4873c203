"""Schema-versioned report documents with deterministic serialization.

Reports are JSON with fixed sections; every missing value is an explicit
null. Keys are sorted and floats rendered with 17 significant digits so
identical inputs produce identical bytes on any platform.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .errors import InvalidInput

SCHEMA_VERSION = 1

SECTIONS = ("config", "metrics", "per_severity", "correlations", "disentanglement", "per_sample")


def new_report(invocation: Sequence[str], seed: Optional[int], package_version: str) -> Dict:
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": {
            "invocation": list(invocation),
            "seed": seed,
            "versions": {"untangle_eval": package_version},
        },
        "metrics": None,
        "per_severity": None,
        "correlations": None,
        "disentanglement": None,
        "per_sample": None,
    }
    return report


def _render(value, out: List[str]) -> None:
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, str):
        out.append(json.dumps(value))
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            out.append("null")
        else:
            out.append(format(value, ".17g"))
    elif isinstance(value, dict):
        out.append("{")
        for i, key in enumerate(sorted(value)):
            if not isinstance(key, str):
                raise InvalidInput("report keys must be strings")
            if i:
                out.append(",")
            out.append(json.dumps(key))
            out.append(":")
            _render(value[key], out)
        out.append("}")
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(",")
            _render(item, out)
        out.append("]")
    else:
        try:
            _render(float(value), out)
        except (TypeError, ValueError) as exc:
            raise InvalidInput(f"unserializable report value of type {type(value).__name__}") from exc


def dumps(report: Dict) -> str:
    out: List[str] = []
    _render(report, out)
    return "".join(out) + "\n"


def write_report(path, report: Dict) -> None:
    Path(path).write_bytes(dumps(report).encode("utf-8"))


def _flatten(prefix: str, value, rows: List[tuple]) -> None:
    if isinstance(value, dict):
        for key in sorted(value):
            _flatten(f"{prefix}.{key}" if prefix else str(key), value[key], rows)
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _flatten(f"{prefix}[{i}]", item, rows)
    else:
        if isinstance(value, float):
            rendered = "" if (math.isnan(value) or math.isinf(value)) else format(value, ".17g")
        elif value is None:
            rendered = ""
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        else:
            rendered = str(value)
        rows.append((prefix, rendered))


def dumps_csv(report: Dict) -> str:
    """Flattened key,value rendering of the same report."""
    rows: List[tuple] = []
    _flatten("", report, rows)
    lines = ["key,value"]
    for key, value in rows:
        if "," in key or '"' in key:
            key = '"' + key.replace('"', '""') + '"'
        if "," in value or '"' in value:
            value = '"' + value.replace('"', '""') + '"'
        lines.append(f"{key},{value}")
    return "\n".join(lines) + "\n"


def write_report_csv(path, report: Dict) -> None:
    Path(path).write_bytes(dumps_csv(report).encode("utf-8"))
