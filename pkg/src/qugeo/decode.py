"""Readouts from measured probabilities to velocity maps, and training losses.

Maps are indexed ``[row, col]`` with the row being depth. Ground-truth maps
are in normalized units: ``(v - v_min) / (v_max - v_min)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .qsim import Statevector, basis_probabilities

MAP_SIZE = 8
PIXEL_STATES = MAP_SIZE * MAP_SIZE


@dataclass(frozen=True)
class Normalization:
    v_min: float
    v_max: float
    pixel_scale: float = 1.0

    def __post_init__(self):
        vals = (self.v_min, self.v_max, self.pixel_scale)
        if not all(np.isfinite(v) for v in vals) or not self.v_min < self.v_max:
            raise ConfigurationError(f"invalid normalization {vals}")

    def normalize(self, v):
        return (np.asarray(v, dtype=np.float64) - self.v_min) / (self.v_max - self.v_min)

    def denormalize(self, u):
        return self.v_min + np.asarray(u, dtype=np.float64) * (self.v_max - self.v_min)

    def to_dict(self) -> dict:
        return {"v_min": float(self.v_min), "v_max": float(self.v_max),
                "pixel_scale": float(self.pixel_scale)}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalization":
        return cls(float(d["v_min"]), float(d["v_max"]), float(d.get("pixel_scale", 1.0)))


def _probs(state) -> np.ndarray:
    if isinstance(state, Statevector):
        return basis_probabilities(state)
    return np.asarray(state, dtype=np.float64)


def pixel_map_from_probs(probs, scale: float) -> np.ndarray:
    """``scale * sqrt(p_i / sum_{j<64} p_j)`` reshaped row-major to 8x8.

    Works on a single probability vector or a stack ``(..., dim)``.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.shape[-1] < PIXEL_STATES:
        raise ConfigurationError("pixel decoding needs at least 6 qubits")
    head = p[..., :PIXEL_STATES]
    mass = head.sum(axis=-1, keepdims=True)
    d = scale * np.sqrt(head / mass)
    return d.reshape(*p.shape[:-1], MAP_SIZE, MAP_SIZE)


def decode_pixelwise(state, scale: float) -> np.ndarray:
    p = _probs(state)
    if p.shape[-1] < PIXEL_STATES:
        raise ConfigurationError("pixel decoding needs at least 6 qubits")
    return pixel_map_from_probs(p, scale)


def _row_signs(dim: int, n_rows: int) -> np.ndarray:
    idx = np.arange(dim)
    return np.stack([1.0 - 2.0 * ((idx >> r) & 1) for r in range(n_rows)], axis=1)


def layer_rows_from_probs(probs, n_rows: int = MAP_SIZE) -> np.ndarray:
    """Per-row value ``(<Z_r> + 1) / 2`` read on qubit ``r``."""
    p = np.asarray(probs, dtype=np.float64)
    dim = p.shape[-1]
    if dim < 2 ** n_rows:
        raise ConfigurationError(f"layer decoding needs {n_rows} readout qubits")
    z = (p @ _row_signs(dim, n_rows)) / p.sum(axis=-1, keepdims=True)
    return np.clip((z + 1.0) / 2.0, 0.0, 1.0)


def decode_layerwise(state, n_rows: int = MAP_SIZE) -> np.ndarray:
    return layer_rows_from_probs(_probs(state), n_rows)


def broadcast_rows(rows, width: int | None = None) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    width = rows.shape[-1] if width is None else width
    return np.repeat(rows[..., :, None], width, axis=-1)


def loss_pixel(G, D) -> float:
    G, D = np.asarray(G, dtype=np.float64), np.asarray(D, dtype=np.float64)
    if G.shape != D.shape:
        raise ConfigurationError(f"shape mismatch {G.shape} vs {D.shape}")
    return float(np.sum((G - D) ** 2))


def loss_layer(G, rows) -> float:
    G, rows = np.asarray(G, dtype=np.float64), np.asarray(rows, dtype=np.float64)
    if G.ndim != 2 or rows.shape != (G.shape[0],):
        raise ConfigurationError(f"need one prediction per row of {G.shape}, got {rows.shape}")
    return float(np.sum((G - rows[:, None]) ** 2))


def _renorm_grad(dq, q, mass):
    """Chain rule through q = p / mass for each row."""
    return (dq - np.sum(q * dq, axis=-1, keepdims=True)) / mass


class PixelReadout:
    """Mean pixel loss over a stack of states against ``targets (S, 8, 8)``."""

    def __init__(self, targets, scale: float):
        self.targets = np.asarray(targets, dtype=np.float64).reshape(-1, PIXEL_STATES)
        self.scale = float(scale)

    def loss_and_dprob(self, probs):
        p = np.asarray(probs)
        n = p.shape[0]
        head = p[:, :PIXEL_STATES]
        mass = head.sum(axis=1, keepdims=True)
        r = np.sqrt(head / mass)
        d = self.scale * r
        diff = self.targets - d
        loss = np.sum(diff ** 2) / n
        g = -2.0 * diff / n  # dL/dD
        safe = r > 1e-150
        dq = np.where(safe, g * self.scale / (2.0 * np.where(safe, r, 1.0)), 0.0)
        dprob = np.zeros_like(p)
        dprob[:, :PIXEL_STATES] = _renorm_grad(dq, head / mass, mass)
        return float(loss), dprob


class LayerReadout:
    """Mean layer loss over a stack of states against ``targets (S, N, N)``."""

    def __init__(self, targets):
        self.targets = np.asarray(targets, dtype=np.float64)
        self.n_rows = self.targets.shape[1]

    def loss_and_dprob(self, probs):
        p = np.asarray(probs)
        n, dim = p.shape
        signs = _row_signs(dim, self.n_rows)
        mass = p.sum(axis=1, keepdims=True)
        q = p / mass
        rows = (q @ signs + 1.0) / 2.0
        diff = self.targets - rows[:, :, None]
        loss = np.sum(diff ** 2) / n
        g_rows = -2.0 * diff.sum(axis=2) / n
        dq = (g_rows @ signs.T) / 2.0
        return float(loss), _renorm_grad(dq, q, mass)


def make_readout(decoder: str, targets, scale: float | None = None):
    if decoder == "pixel":
        if scale is None:
            raise ConfigurationError("pixel decoder needs a scale")
        return PixelReadout(targets, scale)
    if decoder == "layer":
        return LayerReadout(targets)
    raise ConfigurationError(f"unknown decoder {decoder!r}")


def predict_maps(decoder: str, probs, scale: float | None = None) -> np.ndarray:
    """8x8 predicted maps (normalized units) for a stack of probability rows."""
    if decoder == "pixel":
        return pixel_map_from_probs(probs, scale)
    if decoder == "layer":
        return broadcast_rows(layer_rows_from_probs(probs))
    raise ConfigurationError(f"unknown decoder {decoder!r}")
