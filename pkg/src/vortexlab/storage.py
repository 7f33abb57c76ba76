"""Snapshot persistence, run manifests, and deterministic serialization.

Arrays go to disk as raw little-endian float64 in C order with a JSON
sidecar header carrying dim, n, the field role, and the sample time.
CSV floats are written with 17 significant digits; JSON floats use
Python's shortest round-trip repr. Nothing time-of-day dependent is ever
written, so identical configurations produce byte-identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .fields import ScalarField, TensorField, VectorField
from .grid import GridSpec

_FIELD_CLASSES = {0: ScalarField, 1: VectorField, 2: TensorField}


def write_json(path: Path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path: Path):
    with open(path) as fh:
        return json.load(fh)


def save_field(base: Path, field, role: str, time: float) -> tuple[Path, Path]:
    """Write `<base>.bin` (raw samples) and `<base>.json` (header)."""
    base = Path(base)
    base.parent.mkdir(parents=True, exist_ok=True)
    bin_path = base.with_suffix(".bin")
    data = np.ascontiguousarray(field.values, dtype="<f8")
    bin_path.write_bytes(data.tobytes())
    header = {
        "format": "vortexlab-snapshot-v1",
        "dtype": "<f8",
        "order": "C",
        "dim": field.grid.dim,
        "n": field.grid.n,
        "length": field.grid.length,
        "dealias": field.grid.dealias,
        "rank": field.rank,
        "shape": list(field.values.shape),
        "role": role,
        "time": time,
    }
    json_path = base.with_suffix(".json")
    write_json(json_path, header)
    return bin_path, json_path


def load_field(base: Path):
    """Read a snapshot pair back; returns (field, header)."""
    base = Path(base)
    header = read_json(base.with_suffix(".json"))
    grid = GridSpec(
        dim=header["dim"], n=header["n"], length=header["length"], dealias=header["dealias"]
    )
    raw = np.frombuffer(base.with_suffix(".bin").read_bytes(), dtype="<f8")
    values = raw.reshape(header["shape"]).astype(np.float64)
    cls = _FIELD_CLASSES[header["rank"]]
    return cls(grid, values), header


def format_float(x: float) -> str:
    return f"{float(x):.17g}"


def write_csv(path: Path, columns: dict[str, np.ndarray]) -> None:
    """Column-oriented CSV with 17-significant-digit floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    arrays = [np.asarray(columns[name]) for name in names]
    n = arrays[0].shape[0]
    if any(a.shape[0] != n for a in arrays):
        raise ValueError("all CSV columns must have equal length")
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(n):
            fh.write(",".join(format_float(a[i]) for a in arrays) + "\n")


def save_diagnostics(base: Path, diag, time: float) -> list[Path]:
    """Export the scalar diagnostic fields as snapshot pairs.

    Writes carrier magnitude, stretching rate, alignment, stretch balance,
    and the two bracketed monitor quantities next to `base`.
    """
    from .fields import ScalarField

    entries = {
        "carrier_mag": diag.vec_mag,
        "alpha": diag.alpha,
        "rho": diag.rho,
        "align": diag.align,
        "stretch_balance": diag.stretch_balance,
        "alignment_negative": diag.align_negative,
        "stretch_excess": diag.stretch_excess,
    }
    paths = []
    for role, values in entries.items():
        pair = save_field(Path(f"{base}_{role}"), ScalarField(diag.grid, values), role, time)
        paths.extend(pair)
    return paths


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def run_id_for(config_echo: dict) -> str:
    """Content-derived run identifier (no wall clock involved)."""
    blob = json.dumps(config_echo, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_manifest(path: Path, config_echo: dict, files: list[Path], extra: dict) -> dict:
    """Manifest with a config echo, a content-derived run id, and file checksums."""
    path = Path(path)
    root = path.parent
    manifest = {
        "run_id": run_id_for(config_echo),
        "config": config_echo,
        "files": {
            str(Path(f).relative_to(root)): sha256_file(f) for f in sorted(files, key=str)
        },
    }
    manifest.update(extra)
    write_json(path, manifest)
    return manifest


__all__ = [
    "write_json",
    "read_json",
    "save_field",
    "load_field",
    "save_diagnostics",
    "format_float",
    "write_csv",
    "sha256_file",
    "run_id_for",
    "write_manifest",
]
