"""Structured run reports with text, JSON and CSV renderings.

A report is a flat list of records (dicts with scalar values) plus the
resolved configuration and seed that produced them, so any run can be
reproduced from its own output.  JSON output carries a schema version and
a timestamp; the timestamp is the only field that varies between
identical runs.
"""

from __future__ import annotations

import io
import json
import time
from dataclasses import dataclass, field

SCHEMA_VERSION = 1
GENERATOR_NAME = "numpy-pcg64"


@dataclass
class Report:
    command: str
    config: dict
    records: list[dict]
    seed: int | None = None
    notes: list[str] = field(default_factory=list)

    def to_json(self, include_timestamp: bool = True) -> str:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "generator": GENERATOR_NAME if self.seed is not None else None,
            "notes": self.notes,
            "records": self.records,
        }
        if include_timestamp:
            payload["generated_at"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        return json.dumps(payload, indent=2, sort_keys=True, default=_coerce) + "\n"

    def to_csv(self) -> str:
        if not self.records:
            return ""
        fields = list(self.records[0])
        for rec in self.records[1:]:
            for key in rec:
                if key not in fields:
                    fields.append(key)
        out = io.StringIO()
        out.write(",".join(fields) + "\n")
        for rec in self.records:
            out.write(",".join(_cell(rec.get(f)) for f in fields) + "\n")
        return out.getvalue()

    def to_text(self) -> str:
        lines = [f"== {self.command} =="]
        for key in sorted(self.config):
            lines.append(f"   {key}: {_plain(self.config[key])}")
        if self.seed is not None:
            lines.append(f"   seed: {self.seed} ({GENERATOR_NAME})")
        if not self.records:
            lines.append("(no records)")
        else:
            fields = list(self.records[0])
            for rec in self.records[1:]:
                for key in rec:
                    if key not in fields:
                        fields.append(key)
            rows = [[_plain(rec.get(f)) for f in fields] for rec in self.records]
            widths = [
                max(len(f), *(len(r[i]) for r in rows)) for i, f in enumerate(fields)
            ]
            lines.append("  ".join(f.ljust(w) for f, w in zip(fields, widths)))
            for row in rows:
                lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
        for note in self.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return self.to_json()
        if fmt == "csv":
            return self.to_csv()
        if fmt == "text":
            return self.to_text()
        raise ValueError(f"unknown format {fmt!r}")


def _coerce(value):
    try:
        import numpy as np

        if isinstance(value, np.generic):
            return value.item()
        if isinstance(value, np.ndarray):
            return value.tolist()
    except ImportError:  # pragma: no cover
        pass
    return str(value)


def _plain(value) -> str:
    if value is None:
        return "undefined"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _cell(value) -> str:
    text = _plain(value)
    if "," in text or '"' in text:
        text = '"' + text.replace('"', '""') + '"'
    return text
