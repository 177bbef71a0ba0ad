"""Run manifests: a reproducible record of one command invocation.

A manifest holds every input (flags, seeds, input-file hashes) and the
hashes of every output file. Re-running the same command with the same
inputs must reproduce the outputs byte-for-byte, manifest included; the
manifest therefore carries no timestamps or host information.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

PACKAGE_VERSION = "0.1.0"


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass(frozen=True)
class RunManifest:
    command: str
    version: str
    arguments: dict
    input_hashes: dict
    output_hashes: dict

    def to_json(self) -> str:
        payload = {
            "command": self.command,
            "version": self.version,
            "arguments": self.arguments,
            "inputs": self.input_hashes,
            "outputs": self.output_hashes,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def build_manifest(
    command: str,
    arguments: Mapping,
    input_paths: Sequence,
    output_paths: Sequence,
) -> RunManifest:
    return RunManifest(
        command=command,
        version=PACKAGE_VERSION,
        arguments={k: v for k, v in sorted(arguments.items())},
        input_hashes={str(p): file_sha256(p) for p in input_paths},
        output_hashes={str(p): file_sha256(p) for p in output_paths},
    )


def write_manifest(path, manifest: RunManifest) -> None:
    Path(path).write_text(manifest.to_json(), encoding="utf-8")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
