"""On-disk formats: distribution manifests and the binary matrix container.

A dataset is a JSON manifest listing one file per distribution:
empirical samples are CSV files with p columns per row, analytic mixtures
are JSON files with a ``components`` list. Matrix files (Gram or distance)
use a 16-byte header followed by row-major little-endian float64 values.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .distributions import DistributionRecord, EmpiricalDistribution, UniformMixture
from .errors import InputError
from .kernels import FAMILY_TAGS, TAG_FAMILIES, KernelSpec

MAGIC = b"DGRM"
MODE_TAGS = {"exact": 0, "estimated": 1, "wass": 2}
TAG_MODES = {v: k for k, v in MODE_TAGS.items()}
_NO_KERNEL_TAG = 255


def mixture_to_json(m: UniformMixture, label=None) -> dict:
    d = {"components": [{"w": w, "a": a, "b": b} for w, a, b in m.components]}
    if label is not None:
        d["label"] = label
    return d


def mixture_from_json(d: dict) -> tuple[UniformMixture, str | None]:
    try:
        comps = tuple((c["w"], c["a"], c["b"]) for c in d["components"])
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed mixture JSON: {exc}") from exc
    return UniformMixture(comps), d.get("label")


def save_records(records, outdir, stem="rec") -> Path:
    """Write one file per record plus ``manifest.json``; return manifest path."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, rec in enumerate(records):
        if rec.is_analytic:
            name = f"{stem}_{i:04d}.json"
            (outdir / name).write_text(
                json.dumps(mixture_to_json(rec.payload, rec.label)) + "\n"
            )
        else:
            name = f"{stem}_{i:04d}.csv"
            np.savetxt(outdir / name, rec.payload.observations, delimiter=",")
        entries.append({"path": name, "label": rec.label})
    manifest = outdir / "manifest.json"
    manifest.write_text(json.dumps({"records": entries}, indent=1) + "\n")
    return manifest


def load_manifest(path) -> list[DistributionRecord]:
    path = Path(path)
    try:
        spec = json.loads(path.read_text())
        entries = spec["records"]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise InputError(f"cannot read manifest {path}: {exc}") from exc
    records = []
    base = path.parent
    for entry in entries:
        fpath = base / entry["path"]
        label = entry.get("label")
        if fpath.suffix == ".json":
            mixture, file_label = mixture_from_json(json.loads(fpath.read_text()))
            records.append(DistributionRecord(mixture, label if label is not None else file_label))
        elif fpath.suffix == ".csv":
            obs = np.loadtxt(fpath, delimiter=",", ndmin=2)
            records.append(DistributionRecord(EmpiricalDistribution(obs), label))
        else:
            raise InputError(f"unsupported record file type: {fpath}")
    return records


def manifest_hash(path) -> str:
    """SHA-256 over the manifest bytes and every referenced file, in order."""
    path = Path(path)
    h = hashlib.sha256()
    h.update(path.read_bytes())
    spec = json.loads(path.read_text())
    for entry in spec.get("records", []):
        h.update((path.parent / entry["path"]).read_bytes())
    return h.hexdigest()


def write_matrix(path, values: np.ndarray, mode: str, kernel: KernelSpec | None = None,
                 sidecar: dict | None = None) -> Path:
    """Write a square matrix in the binary container, plus a JSON sidecar."""
    path = Path(path)
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if values.shape != (n, n):
        raise InputError(f"matrix must be square, got {values.shape}")
    ktag = _NO_KERNEL_TAG if kernel is None else FAMILY_TAGS[kernel.family]
    header = MAGIC + struct.pack("<IBB6x", n, MODE_TAGS[mode], ktag)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(values.astype("<f8").tobytes(order="C"))
    meta = dict(sidecar or {})
    meta["mode"] = mode
    meta["n"] = n
    if kernel is not None:
        meta["kernel"] = kernel.to_json()
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=1) + "\n")
    return path


def read_matrix(path) -> tuple[np.ndarray, str, KernelSpec | None, dict]:
    """Read a container file; returns (values, mode, kernel, sidecar)."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise InputError(f"{path} is not a matrix container")
    n, mode_tag, ktag = struct.unpack("<IBB6x", raw[4:16])
    expected = 16 + 8 * n * n
    if len(raw) != expected:
        raise InputError(f"{path}: expected {expected} bytes, found {len(raw)}")
    values = np.frombuffer(raw[16:], dtype="<f8").reshape(n, n).copy()
    mode = TAG_MODES.get(mode_tag)
    if mode is None:
        raise InputError(f"{path}: unknown mode tag {mode_tag}")
    sidecar_path = Path(str(path) + ".json")
    sidecar = json.loads(sidecar_path.read_text()) if sidecar_path.exists() else {}
    kernel = None
    if "kernel" in sidecar:
        kernel = KernelSpec.from_json(sidecar["kernel"])
        if ktag != _NO_KERNEL_TAG and FAMILY_TAGS[kernel.family] != ktag:
            raise InputError(f"{path}: header kernel tag disagrees with sidecar")
    elif ktag != _NO_KERNEL_TAG:
        sidecar["kernel_family"] = TAG_FAMILIES[ktag]
    return values, mode, kernel, sidecar


def write_matrix_csv(path, values: np.ndarray) -> Path:
    path = Path(path)
    np.savetxt(path, np.asarray(values, dtype=float), delimiter=",")
    return path
