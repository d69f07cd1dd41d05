"""Run manifests: what was run, on which bytes, with which parameters.

The run hash covers the subcommand, the content hashes of every input
file, and every parameter that can change an output byte. It deliberately
excludes output locations and the timestamp, so reruns of the same
logical run produce reports that reference the same hash and are
byte-identical. ``SOURCE_DATE_EPOCH`` pins the recorded timestamp.
"""

from __future__ import annotations

import datetime
import hashlib
import os
from dataclasses import dataclass

from . import __version__
from .report import atomic_write_text, canonical_dumps

TOOL = {"name": "multibias", "version": __version__}


def file_sha256(path: str | os.PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        moment = datetime.datetime.fromtimestamp(int(epoch), tz=datetime.timezone.utc)
    else:
        moment = datetime.datetime.now(tz=datetime.timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class RunManifest:
    subcommand: str
    inputs: tuple[dict, ...]
    parameters: dict
    outputs: tuple[str, ...]
    timestamp: str

    @property
    def run_hash(self) -> str:
        hashed = {
            "subcommand": self.subcommand,
            "inputs": [dict(entry) for entry in self.inputs],
            "parameters": self.parameters,
            "tool": TOOL,
        }
        return hashlib.sha256(canonical_dumps(hashed).encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "inputs": [dict(entry) for entry in self.inputs],
            "parameters": self.parameters,
            "tool": dict(TOOL),
            "outputs": list(self.outputs),
            "timestamp": self.timestamp,
            "run_hash": self.run_hash,
        }


def build_manifest(
    subcommand: str,
    input_paths: list[str],
    parameters: dict,
    outputs: list[str],
) -> RunManifest:
    inputs = tuple({"path": str(p), "sha256": file_sha256(p)} for p in input_paths)
    return RunManifest(
        subcommand=subcommand,
        inputs=inputs,
        parameters=parameters,
        outputs=tuple(str(p) for p in outputs),
        timestamp=_timestamp(),
    )


def write_manifest(manifest: RunManifest, path: str | os.PathLike) -> None:
    atomic_write_text(path, canonical_dumps(manifest.to_dict()))
