"""Dataset generation and scaling on disk.

Raw datasets hold ``velocity`` ``(N, 70, 70)`` and ``seismic``
``(N, 5, 1000, 70)``; scaled datasets hold ``seismic`` ``(N, 256)`` and
``velocity`` ``(N, 8, 8)``. Both use the manifest container from :mod:`io`.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io, wavesim
from .decode import Normalization
from .errors import ConfigurationError, FormatError
from .train import ScaledDataset

log = logging.getLogger(__name__)

WORKERS_ENV = "QUGEO_WORKERS"
TRAIN_FRACTION = 0.8


def n_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigurationError(f"{WORKERS_ENV} must be >= 1")
    return n


def split_sizes(n_samples: int) -> dict:
    """80/20 train/test boundary; 500 samples give 400/100."""
    n_train = min(n_samples, max(1, int(round(TRAIN_FRACTION * n_samples))))
    return {"train": n_train, "test": n_samples - n_train}


def normalization_for(labels, n_train: int) -> Normalization:
    """Dataset min/max velocity and the mean L2 norm of normalized training maps."""
    labels = np.asarray(labels, dtype=np.float64)
    v_min, v_max = float(labels.min()), float(labels.max())
    if not v_min < v_max:
        v_min, v_max = wavesim.V_RANGE
    norm = Normalization(v_min, v_max)
    flat = norm.normalize(labels[:n_train]).reshape(n_train, -1)
    scale = float(np.linalg.norm(flat, axis=1).mean())
    return Normalization(v_min, v_max, scale if scale > 0 else 1.0)


def _ordered_map(fn, items):
    """``map`` over items in order, on a process pool when workers > 1."""
    workers = n_workers()
    if workers == 1:
        yield from map(fn, items)
        return
    with ProcessPoolExecutor(workers) as pool:
        yield from pool.map(fn, items, chunksize=1)


def _prepare(out) -> Path:
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create {out}: {exc}") from None
    return out


def generate_dataset(out, n_samples: int, seed: int = 0) -> io.Manifest:
    """Synthesize flat-layer maps and their full-resolution shot gathers."""
    out = _prepare(out)
    maps = wavesim.generate_flatvel(n_samples, seed)
    vel = io.PayloadWriter(out, "velocity", wavesim.FULL_SHAPE)
    seis = io.PayloadWriter(
        out, "seismic", (wavesim.FULL_SOURCES, wavesim.FULL_NT, wavesim.FULL_SHAPE[1]))
    for k, gather in enumerate(_ordered_map(wavesim.simulate_full, maps)):
        vel.append(maps[k])
        seis.append(gather)
        log.info("sample %d/%d simulated", k + 1, n_samples)
    split = split_sizes(n_samples)
    grid = wavesim.full_grid()
    manifest = io.Manifest(
        n_samples, [vel.close(), seis.close()],
        normalization_for(np.stack(maps), split["train"]).to_dict(), split,
        {"seed": seed, "method": "none", "wavelet_hz": wavesim.FULL_FREQ,
         "grid": {"nx": grid.nx, "ny": grid.ny, "dx": grid.dx, "dt": wavesim.FULL_DT,
                  "sim_dt": grid.dt, "nt": wavesim.FULL_NT, "sponge_width": grid.sponge_width,
                  "n_sources": wavesim.FULL_SOURCES,
                  "source_columns": wavesim.source_columns().tolist()}})
    io.write_manifest(out, manifest)
    return manifest


def _physics_one(c_full):
    return wavesim.scale_physics(c_full)


SCALE_METHODS = {"physics": "physics", "dsample": "nearest"}


def scale_dataset(src, out, method: str = "physics") -> io.Manifest:
    """Scale a raw dataset to 256-value inputs and 8x8 labels."""
    if method not in SCALE_METHODS:
        raise ConfigurationError(f"unknown scaling method {method!r}; use physics or dsample")
    manifest = io.read_manifest(src)
    for name in ("velocity", "seismic"):
        manifest.tensor(name)
    velocity = io.read_tensor(src, manifest, "velocity").astype(np.float64)
    out = _prepare(out)
    n = manifest.n_samples
    labels = np.empty((n, *wavesim.SMALL_SHAPE))
    inputs = np.empty((n, wavesim.SMALL_NT * wavesim.SMALL_SHAPE[1]))
    if method == "physics":
        results = _ordered_map(_physics_one, list(velocity))
        for k, (c_small, s) in enumerate(results):
            labels[k], inputs[k] = c_small, s
    else:
        seismic = io.read_tensor(src, manifest, "seismic", mmap=True)
        for k in range(n):
            labels[k], inputs[k] = wavesim.scale_dsample(seismic[k], velocity[k])
    split = dict(manifest.split) or split_sizes(n)
    prov = {"seed": manifest.provenance.get("seed"), "method": SCALE_METHODS[method],
            "source": str(src)}
    if method == "physics":
        grid, sub = wavesim.small_grid(float(labels.max()))
        prov.update(wavelet_hz=wavesim.SMALL_FREQ,
                    grid={"nx": grid.nx, "ny": grid.ny, "dx": grid.dx,
                          "sim_dt": grid.dt, "samples": wavesim.SMALL_NT, "substeps": sub,
                          "sponge_width": grid.sponge_width,
                          "source_column": wavesim.SMALL_SHAPE[1] // 2,
                          "source_row": wavesim.SMALL_DEPTH})
    else:
        prov.update(wavelet_hz=manifest.provenance.get("wavelet_hz"),
                    grid={"time_samples": wavesim.SMALL_NT, "receivers": wavesim.SMALL_SHAPE[1],
                          "shot": 0})
    result = io.Manifest(
        n, [io.write_tensor(out, "seismic", inputs), io.write_tensor(out, "velocity", labels)],
        normalization_for(labels, split["train"]).to_dict(), split, prov)
    io.write_manifest(out, result)
    return result


def load_scaled(directory) -> ScaledDataset:
    manifest = io.read_manifest(directory)
    inputs = io.read_tensor(directory, manifest, "seismic").astype(np.float64)
    labels = io.read_tensor(directory, manifest, "velocity").astype(np.float64)
    if inputs.ndim != 2 or labels.ndim != 3:
        raise FormatError(
            f"{directory} is not a scaled dataset (seismic {inputs.shape}, velocity {labels.shape})")
    if not manifest.normalization:
        raise FormatError(f"{directory}: manifest lacks normalization constants")
    n_train = int(manifest.split.get("train", split_sizes(manifest.n_samples)["train"]))
    return ScaledDataset(inputs, labels, Normalization.from_dict(manifest.normalization),
                         n_train, manifest.provenance)
