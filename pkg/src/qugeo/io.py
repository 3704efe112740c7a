"""On-disk formats: NPY tensors, raw-payload dataset directories, checkpoints
and metric CSV logs.

A dataset directory holds ``manifest.json`` plus raw little-endian float32
payload files. Manifest layout::

    {"version": 1, "n_samples": N,
     "tensors": [{"name", "shape", "dtype": "float32", "offset", "file"}],
     "normalization": {"v_min", "v_max", "pixel_scale"},
     "split": {"train": n_train, "test": n_test},
     "provenance": {...}}
"""

from __future__ import annotations

import base64
import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib import format as npformat

from .errors import FormatError

MANIFEST = "manifest.json"
MANIFEST_VERSION = 1
NPY_MAGIC = b"\x93NUMPY"
_NPY_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


# -- NPY ------------------------------------------------------------------------

def write_npy(path, array) -> None:
    a = np.asarray(array)
    if a.dtype.newbyteorder("<").str not in _NPY_DTYPES:
        raise FormatError(f"unsupported dtype {a.dtype}; use float32 or float64")
    a = np.ascontiguousarray(a, dtype=a.dtype.newbyteorder("<"))
    header = {"descr": a.dtype.str, "fortran_order": False, "shape": a.shape}
    with open(path, "wb") as fh:
        npformat.write_array_header_1_0(fh, header)
        fh.write(a.tobytes(order="C"))


def read_npy(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(6)
        if magic != NPY_MAGIC:
            raise FormatError(f"{path}: not an NPY file (bad magic)")
        version = fh.read(2)
        if version != b"\x01\x00":
            raise FormatError(f"{path}: unsupported NPY version {tuple(version)}")
        try:
            shape, fortran, dtype = npformat.read_array_header_1_0(fh)
        except ValueError as exc:
            raise FormatError(f"{path}: malformed NPY header ({exc})") from None
        if fortran:
            raise FormatError(f"{path}: Fortran-order layout is not supported")
        if dtype.str not in _NPY_DTYPES:
            raise FormatError(f"{path}: unsupported dtype {dtype.str}")
        expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        payload = fh.read()
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload has {len(payload)} bytes, header implies {expected}")
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


# -- dataset directories ---------------------------------------------------------

@dataclass
class Manifest:
    n_samples: int
    tensors: list = field(default_factory=list)
    normalization: dict = field(default_factory=dict)
    split: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    version: int = MANIFEST_VERSION

    def tensor(self, name: str) -> dict:
        for t in self.tensors:
            if t["name"] == name:
                return t
        raise FormatError(f"dataset has no tensor named {name!r}")

    def to_dict(self) -> dict:
        return {"version": self.version, "n_samples": self.n_samples,
                "tensors": self.tensors, "normalization": self.normalization,
                "split": self.split, "provenance": self.provenance}


def write_manifest(directory, manifest: Manifest) -> None:
    path = Path(directory) / MANIFEST
    norm = manifest.normalization
    if norm:
        vals = [norm.get("v_min"), norm.get("v_max"), norm.get("pixel_scale")]
        if not all(v is not None and np.isfinite(v) for v in vals) or not vals[0] < vals[1]:
            raise FormatError(f"invalid normalization constants {norm}")
    path.write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")


def read_manifest(directory) -> Manifest:
    path = Path(directory) / MANIFEST
    try:
        d = json.loads(path.read_text())
    except FileNotFoundError:
        raise FormatError(f"{path} not found") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None
    if d.get("version") != MANIFEST_VERSION:
        raise FormatError(f"{path}: unsupported manifest version {d.get('version')}")
    m = Manifest(int(d["n_samples"]), list(d.get("tensors", [])), dict(d.get("normalization", {})),
                 dict(d.get("split", {})), dict(d.get("provenance", {})), d["version"])
    for t in m.tensors:
        if t.get("dtype") != "float32":
            raise FormatError(f"tensor {t.get('name')}: only float32 payloads are supported")
        try:
            size = (Path(directory) / t["file"]).stat().st_size
        except FileNotFoundError:
            raise FormatError(f"tensor {t.get('name')}: payload file {t['file']} missing") from None
        need = t["offset"] + 4 * int(np.prod(t["shape"], dtype=np.int64))
        if size < need:
            raise FormatError(f"tensor {t['name']}: payload {size} bytes, need {need}")
    return m


class PayloadWriter:
    """Stream float32 rows of one tensor into a raw payload file."""

    def __init__(self, directory, name: str, row_shape: tuple, filename: str | None = None):
        self.directory = Path(directory)
        self.name = name
        self.row_shape = tuple(int(s) for s in row_shape)
        self.filename = filename or f"{name}.f32"
        self.count = 0
        self._fh = open(self.directory / self.filename, "wb")

    def append(self, row) -> None:
        a = np.asarray(row, dtype="<f4")
        if a.shape != self.row_shape:
            raise FormatError(f"{self.name}: row shape {a.shape}, expected {self.row_shape}")
        self._fh.write(a.tobytes(order="C"))
        self.count += 1

    def close(self) -> dict:
        self._fh.close()
        return {"name": self.name, "shape": [self.count, *self.row_shape],
                "dtype": "float32", "offset": 0, "file": self.filename}


def write_tensor(directory, name: str, array) -> dict:
    a = np.asarray(array)
    w = PayloadWriter(directory, name, a.shape[1:])
    for row in a:
        w.append(row)
    return w.close()


def read_tensor(directory, manifest: Manifest, name: str, mmap: bool = False) -> np.ndarray:
    t = manifest.tensor(name)
    path = Path(directory) / t["file"]
    shape = tuple(t["shape"])
    if mmap:
        return np.memmap(path, dtype="<f4", mode="r", offset=t["offset"], shape=shape)
    count = int(np.prod(shape, dtype=np.int64))
    with open(path, "rb") as fh:
        fh.seek(t["offset"])
        raw = fh.read(4 * count)
    if len(raw) != 4 * count:
        raise FormatError(f"tensor {name}: truncated payload")
    return np.frombuffer(raw, dtype="<f4").reshape(shape).copy()


# -- checkpoints -----------------------------------------------------------------

def encode_params(params) -> str:
    return base64.b64encode(np.asarray(params, dtype="<f8").tobytes()).decode("ascii")


def decode_params(text: str, n: int | None = None) -> np.ndarray:
    raw = base64.b64decode(text.encode("ascii"), validate=True)
    if len(raw) % 8:
        raise FormatError("parameter payload is not a whole number of float64 values")
    p = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if n is not None and p.size != n:
        raise FormatError(f"checkpoint has {p.size} parameters, config implies {n}")
    return p


def write_json(path, payload: dict) -> None:
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise FormatError(f"{path} not found") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None


# -- CSV -------------------------------------------------------------------------

HISTORY_FIELDS = ("epoch", "train_loss", "test_mse", "test_ssim")


def write_csv(path, fields, rows) -> None:
    """``rows`` are dicts keyed by ``fields`` or plain sequences."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for row in rows:
            vals = [row[f] for f in fields] if isinstance(row, dict) else list(row)
            w.writerow([_fmt(v) for v in vals])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_csv(path) -> tuple[list, list]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[_parse(x) for x in row] for row in r]
    return header, rows


def _parse(x: str):
    try:
        return int(x)
    except ValueError:
        return float(x)
