"""MSE and SSIM between velocity maps in normalized units (data range 1)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigurationError

WINDOW = 7
SIGMA = 1.5
C1 = (0.01 * 1.0) ** 2
C2 = (0.03 * 1.0) ** 2


@dataclass(frozen=True)
class MetricReport:
    mse: float
    ssim: float

    def to_dict(self) -> dict:
        return {"mse": self.mse, "ssim": self.ssim}


def _pair(A, B):
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise ConfigurationError(f"shape mismatch {A.shape} vs {B.shape}")
    return A, B


def mse(A, B) -> float:
    A, B = _pair(A, B)
    return float(np.mean((A - B) ** 2))


def gaussian_window(size: int = WINDOW, sigma: float = SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-x ** 2 / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_batch(A, B, window: int = WINDOW, sigma: float = SIGMA) -> np.ndarray:
    """Per-map SSIM over the trailing two axes, averaged over valid windows."""
    A, B = _pair(A, B)
    if A.ndim < 2 or min(A.shape[-2:]) < window:
        raise ConfigurationError(f"maps must be at least {window}x{window}")
    w = gaussian_window(window, sigma)

    def filt(x):
        v = sliding_window_view(x, (window, window), axis=(-2, -1))
        return np.einsum("...ij,ij->...", v, w)

    mu_a, mu_b = filt(A), filt(B)
    var_a = filt(A * A) - mu_a ** 2
    var_b = filt(B * B) - mu_b ** 2
    cov = filt(A * B) - mu_a * mu_b
    num = (2 * mu_a * mu_b + C1) * (2 * cov + C2)
    den = (mu_a ** 2 + mu_b ** 2 + C1) * (var_a + var_b + C2)
    return (num / den).mean(axis=(-2, -1))


def ssim(A, B) -> float:
    A, B = _pair(A, B)
    if A.ndim != 2:
        raise ConfigurationError("ssim expects a single 2D map")
    return float(ssim_batch(A, B))


def report(predictions, labels) -> MetricReport:
    """Mean MSE and mean SSIM over a stack of maps."""
    P, L = _pair(predictions, labels)
    per_mse = np.mean((P - L) ** 2, axis=(-2, -1))
    return MetricReport(float(per_mse.mean()), float(ssim_batch(P, L).mean()))
