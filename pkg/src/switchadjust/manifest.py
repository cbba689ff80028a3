"""Run manifests: a JSON record of what a CLI run did and produced.

The manifest stores the command, the full effective configuration, the seed,
the package version, and a sha256 for every output file.  Timestamps are
omitted unless requested so that re-running a command yields byte-identical
artifacts, manifest included.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Optional

from .errors import SchemaError


def package_version() -> str:
    try:
        return metadata.version("switchadjust")
    except metadata.PackageNotFoundError:
        return "unknown"


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: Optional[int]
    version: str = field(default_factory=package_version)
    outputs: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    started: Optional[str] = None
    finished: Optional[str] = None

    def add_output(self, path: str | Path, base: str | Path) -> None:
        """Record one output file; paths are stored relative to the run dir."""
        path = Path(path)
        self.outputs.append(
            {"path": path.relative_to(base).as_posix(), "sha256": file_sha256(path)}
        )

    def write(self, path: str | Path) -> None:
        payload = asdict(self)
        if self.started is None:
            payload.pop("started")
            payload.pop("finished")
        Path(path).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def load_manifest(path: str | Path) -> RunManifest:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from None
    for key in ("command", "config", "seed", "version", "outputs"):
        if key not in payload:
            raise SchemaError(f"{path}: manifest missing field {key!r}")
    return RunManifest(
        command=payload["command"],
        config=payload["config"],
        seed=payload["seed"],
        version=payload["version"],
        outputs=payload["outputs"],
        failures=payload.get("failures", []),
        started=payload.get("started"),
        finished=payload.get("finished"),
    )


def verify_manifest(path: str | Path) -> list[str]:
    """Check recorded hashes against the files on disk; returns mismatches."""
    manifest = load_manifest(path)
    base = Path(path).parent
    problems = []
    for entry in manifest.outputs:
        target = base / entry["path"]
        if not target.exists():
            problems.append(f"{entry['path']}: missing")
        elif file_sha256(target) != entry["sha256"]:
            problems.append(f"{entry['path']}: hash mismatch")
    return problems
