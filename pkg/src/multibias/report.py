"""Deterministic report serialization.

Reports are written as canonical JSON: keys sorted, floats with 17
significant digits, ``\\n`` line endings, atomic replace on write. Two
writes of an equal report are byte-identical, so artifacts can be diffed
in CI. TSV export uses a tab-separated header row and the same float
format.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .errors import DataError, UsageError

REPORT_KINDS = (
    "inspect",
    "spectrum",
    "mac",
    "comparison",
    "analogy",
    "cluster",
    "debias-provenance",
)


def format_float(value: float) -> str:
    """17-significant-digit decimal form; round-trips any IEEE double."""
    if value != value:
        return "NaN"
    if value == float("inf"):
        return "Infinity"
    if value == float("-inf"):
        return "-Infinity"
    return f"{value:.17g}"


def canonical_dumps(obj, indent: int = 2) -> str:
    """Serialize to canonical JSON text (sorted keys, fixed float format)."""
    out: list[str] = []
    _emit(obj, out, indent, 0)
    out.append("\n")
    return "".join(out)


def _emit(obj, out: list[str], indent: int, level: int) -> None:
    pad = " " * (indent * (level + 1))
    close_pad = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        keys = sorted(obj)
        for i, key in enumerate(keys):
            if not isinstance(key, str):
                raise DataError("bad-report-key", f"report keys must be strings, got {key!r}")
            out.append(pad)
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(": ")
            _emit(obj[key], out, indent, level + 1)
            out.append(",\n" if i + 1 < len(keys) else "\n")
        out.append(close_pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(obj):
            out.append(pad)
            _emit(item, out, indent, level + 1)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(close_pad + "]")
    else:
        raise DataError("unserializable", f"cannot serialize {type(obj).__name__} in a report")


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


@dataclass(frozen=True)
class Report:
    """A serializable run artifact: payload plus manifest reference."""

    kind: str
    payload: dict
    manifest: str
    warnings: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in REPORT_KINDS:
            raise DataError("unknown-report-kind", f"unknown report kind {self.kind!r}")
        object.__setattr__(self, "warnings", tuple(self.warnings))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "payload": self.payload,
            "manifest": self.manifest,
            "warnings": list(self.warnings),
        }


def write(report: Report, path: str | os.PathLike, format: str = "json") -> None:
    """Atomically write the report as canonical JSON or TSV."""
    if format == "json":
        atomic_write_text(path, canonical_dumps(report.to_dict()))
    elif format == "tsv":
        atomic_write_text(path, to_tsv(report))
    else:
        raise UsageError(f"unknown report format {format!r}")


def read(path: str | os.PathLike) -> Report:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict) or not {"kind", "payload", "manifest", "warnings"} <= set(raw):
        raise DataError("bad-report", f"{path}: not a report file")
    return Report(raw["kind"], raw["payload"], raw["manifest"], tuple(raw["warnings"]))


def _cell(value) -> str:
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def tsv_table(header: list[str], rows: list[list]) -> str:
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def to_tsv(report: Report) -> str:
    """Tabular view for report kinds with a natural row structure."""
    payload = report.payload
    if report.kind == "cluster":
        header = ["class", "word", "original_bias", "neighbor_count_biased", "neighbor_count_debiased"]
        rows = []
        for entry in payload["classes"]:
            for prof in entry["professions"]:
                rows.append([
                    entry["class"],
                    prof["word"],
                    prof["original_bias"],
                    prof["neighbor_count_biased"],
                    prof["neighbor_count_debiased"],
                ])
        return tsv_table(header, rows)
    if report.kind == "analogy":
        header = ["seed_a", "seed_b", "x", "y", "score"]
        rows = []
        for block in payload["seeds"]:
            for cand in block["candidates"]:
                rows.append([block["seed"][0], block["seed"][1], cand["x"], cand["y"], cand["score"]])
        return tsv_table(header, rows)
    if report.kind == "mac":
        header = ["target", "attributes", "s"]
        rows = [[cell["target"], cell["attributes"], cell["s"]] for cell in payload["cells"]]
        return tsv_table(header, rows)
    raise UsageError(f"report kind {report.kind!r} has no TSV form; use --format json")
