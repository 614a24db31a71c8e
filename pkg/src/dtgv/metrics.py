"""Restoration quality metrics: RMSE, ISNR and mean SSIM."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import GridShapeError
from .grids import as_field

#: Standard SSIM constants for unit dynamic range.
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


@dataclass
class QualityRecord:
    """One row of quantitative results for a labelled restoration."""

    rmse: float
    isnr: float
    mssim: float
    label: str = ""

    def csv_row(self) -> str:
        return f"{self.label},{self.rmse!r},{self.isnr!r},{self.mssim!r}"


def _pair(u, u_ref):
    a, b = as_field(u), as_field(u_ref)
    if a.shape != b.shape:
        raise GridShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def rmse(u, u_ref) -> float:
    """Root mean square error sqrt(mean((u - u_ref)^2))."""
    a, b = _pair(u, u_ref)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def isnr(b, u_rec, u_ref) -> float:
    """Improvement in SNR of the restoration over the observed image, in dB.

    10 log10(||b - ref||^2 / ||rec - ref||^2); +inf when the restoration is
    exact (callers should treat that as saturated).
    """
    obs, ref = _pair(b, u_ref)
    rec, _ = _pair(u_rec, u_ref)
    num = float(np.sum((obs - ref) ** 2))
    den = float(np.sum((rec - ref) ** 2))
    if den == 0.0:
        return math.inf
    return 10.0 * math.log10(num / den)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = size // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def mssim(u, u_ref, data_range: float = 1.0, window_size: int = SSIM_WINDOW,
          sigma: float = SSIM_SIGMA) -> float:
    """Mean structural similarity with an 11x11 Gaussian window (sigma 1.5).

    Local means/variances are Gaussian-weighted; the map is averaged over the
    valid interior (no padding).  Identical images score exactly 1.
    """
    a, b = _pair(u, u_ref)
    if min(a.shape) < window_size:
        raise GridShapeError(
            f"image {a.shape} smaller than the {window_size}x{window_size} window")
    w = _gaussian_window(window_size, sigma)
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    def smooth(x):
        return signal.fftconvolve(x, w, mode="valid")

    mu_a = smooth(a)
    mu_b = smooth(b)
    var_a = smooth(a * a) - mu_a ** 2
    var_b = smooth(b * b) - mu_b ** 2
    cov = smooth(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def evaluate(b, u_rec, u_ref, label: str = "") -> QualityRecord:
    """Bundle the three metrics for one restoration."""
    return QualityRecord(rmse=rmse(u_rec, u_ref), isnr=isnr(b, u_rec, u_ref),
                         mssim=mssim(u_rec, u_ref), label=label)
