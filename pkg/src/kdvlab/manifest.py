"""Run provenance: manifests, atomic artifact writes, derived seeds.

Every CSV artifact is written atomically (temp file + rename) next to a
JSON manifest sidecar carrying the command line, the config snapshot, the
master seed, the shard count, the tool version, wall time, the active cost
guards, and the bump profile identifiers.  All randomness flows from the
single master seed through named children, never from ambient state.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import __version__


def format17(x: float) -> str:
    """Floats with 17 significant digits so byte-level determinism is checkable."""
    return format(float(x), ".17g")


def derived_seed(master: int, label: str) -> int:
    """A stable child seed for `label`; independent labels give independent
    streams via SeedSequence spawn keys derived from a hash of the label."""
    digest = hashlib.sha256(label.encode()).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(words))
    return int(ss.generate_state(1)[0])


def derived_rng(master: int, label: str) -> np.random.Generator:
    return np.random.default_rng(derived_seed(master, label))


@dataclass
class RunManifest:
    command_line: str
    subcommand: str
    config: Dict
    seed: int
    shards: int
    tool_version: str = __version__
    wall_time_seconds: float = 0.0
    guards: Dict[str, float] = field(default_factory=dict)
    profiles: Dict[str, str] = field(default_factory=dict)
    skips: List[Dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "RunManifest":
        return cls(**json.loads(s))


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def manifest_path_for(artifact: Path) -> Path:
    artifact = Path(artifact)
    return artifact.with_name(artifact.name + ".manifest.json")


def write_artifact(path: Path, csv_text: str, manifest: RunManifest) -> None:
    """Write the CSV and its manifest sidecar, both atomically."""
    atomic_write_text(Path(path), csv_text)
    atomic_write_text(manifest_path_for(path), manifest.to_json())


class Stopwatch:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0
        return False
