"""Model checkpoints as a flat zip archive.

Layout::

    manifest.json           format, model kind/config, config hash, entry index
    params/<name>           raw little-endian float64 data, row-major
    scaler/mean, scaler/std

The manifest lists every entry with its shape so the archive can be read
without numpy.
"""

from __future__ import annotations

import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .models import Forecaster, ModelConfig, build_model

FORMAT = "tankbench-checkpoint"
VERSION = 1


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict[str, np.ndarray]
    mean: np.ndarray
    std: np.ndarray
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: Forecaster, meta: dict | None = None) -> "Checkpoint":
        return cls(model.config, model.state(), model.mean.copy(), model.std.copy(),
                   model.seed, dict(meta or {}))

    def to_model(self) -> Forecaster:
        m = build_model(self.config, self.seed)
        m.load_state(self.params)
        m.mean, m.std = self.mean.copy(), self.std.copy()
        return m

    @property
    def config_hash(self) -> str:
        return self.config.config_hash()

    def save(self, path: str | Path) -> None:
        entries = {f"params/{k}": v for k, v in self.params.items()}
        entries["scaler/mean"] = self.mean
        entries["scaler/std"] = self.std
        manifest = {
            "format": FORMAT,
            "version": VERSION,
            "model_kind": self.config.kind,
            "model_config": self.config.to_dict(),
            "config_hash": self.config_hash,
            "seed": self.seed,
            "meta": self.meta,
            "entries": [{"name": k, "shape": list(v.shape)} for k, v in entries.items()],
        }
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
            zf.writestr(_info("manifest.json"), json.dumps(manifest, indent=1, sort_keys=True))
            for name, arr in entries.items():
                zf.writestr(_info(name), np.ascontiguousarray(arr, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "Checkpoint":
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            if manifest.get("format") != FORMAT:
                raise ValueError(f"{path}: not a {FORMAT} archive")
            arrays = {}
            for e in manifest["entries"]:
                buf = zf.read(e["name"])
                arrays[e["name"]] = np.frombuffer(buf, dtype="<f8").reshape(e["shape"]).astype(np.float64)
        config = ModelConfig.from_dict(manifest["model_config"])
        params = {k[len("params/"):]: v for k, v in arrays.items() if k.startswith("params/")}
        return cls(config, params, arrays["scaler/mean"], arrays["scaler/std"],
                   int(manifest.get("seed", 0)), manifest.get("meta", {}))


def _info(name: str) -> zipfile.ZipInfo:
    # fixed timestamp keeps archives byte-identical across runs
    zi = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
    zi.compress_type = zipfile.ZIP_STORED
    return zi
