"""Run provenance: resolved config, seeds, timings and a hashed file index."""

from __future__ import annotations

import hashlib
import json
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__

MANIFEST_NAME = "manifest.json"


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    seed: int
    threads: int
    rng: str
    derived_seeds: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    wall_clock_s: float = 0.0

    def add(self, out_dir: Path, path: Path) -> None:
        rel = str(Path(path).relative_to(out_dir))
        if any(f["path"] == rel for f in self.files):
            raise ValueError(f"{rel} already listed in the manifest")
        self.files.append({"path": rel, "sha256": sha256(path), "bytes": Path(path).stat().st_size})

    def to_dict(self) -> dict:
        return {
            "tool": "slognls",
            "version": __version__,
            "subcommand": self.subcommand,
            "config": self.config,
            "seed": self.seed,
            "derived_seeds": self.derived_seeds,
            "rng": self.rng,
            "threads": self.threads,
            "wall_clock_s": self.wall_clock_s,
            "platform": {
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "files": sorted(self.files, key=lambda f: f["path"]),
        }

    def write(self, out_dir: Path) -> Path:
        path = Path(out_dir) / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def load(path) -> dict:
    return json.loads(Path(path).read_text())
