"""Checkpoint directories: ``manifest.json`` plus one ``.dft`` file per parameter."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from ..fileio import read_dft, write_dft

MANIFEST = "manifest.json"


def _as4d(a: np.ndarray) -> np.ndarray:
    return a.reshape((1,) * (4 - a.ndim) + a.shape) if a.ndim < 4 else a


def save_checkpoint(network, directory, iteration: int, config_text: str = "", config_hash: str = "") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for idx, (name, p) in enumerate(network.named_parameters()):
        fname = f"{idx:03d}_{name}.dft"
        write_dft(directory / fname, _as4d(p.data))
        entries.append({"name": name, "shape": list(p.shape), "file": fname})
    manifest = {
        "iteration": iteration,
        "config_hash": config_hash,
        "config": config_text,
        "parameters": entries,
    }
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=2))
    return directory


def read_manifest(directory) -> dict:
    return json.loads((Path(directory) / MANIFEST).read_text())


def load_parameters(directory) -> dict[str, np.ndarray]:
    directory = Path(directory)
    out = {}
    for entry in read_manifest(directory)["parameters"]:
        out[entry["name"]] = read_dft(directory / entry["file"]).data.reshape(entry["shape"])
    return out


def restore(network, directory) -> None:
    """Copy stored values into ``network``'s parameters, checking names and shapes."""
    stored = load_parameters(directory)
    names = [n for n, _ in network.named_parameters()]
    if names != list(stored):
        raise ValueError("checkpoint parameters do not match the network layout")
    for name, p in network.named_parameters():
        if stored[name].shape != p.shape:
            raise ValueError(f"{name}: stored shape {stored[name].shape} != {p.shape}")
        p.data[...] = stored[name]


def checksum(directory) -> str:
    """SHA-256 over the parameter files, in manifest order."""
    directory = Path(directory)
    h = hashlib.sha256()
    for entry in read_manifest(directory)["parameters"]:
        h.update((directory / entry["file"]).read_bytes())
    return h.hexdigest()
