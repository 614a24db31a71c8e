"""Test-problem generation: phantoms, point-spread functions, Poisson degradation.

The degradation protocol mirrors photon-counting acquisition: the clean image
is scaled so that the blurred photon budget hits a target SNR in the sense

    SNR = 10 log10( N_exact / sqrt(N_exact + N_background) ),

where N_exact is the total count in the blurred signal and N_background the
total count contributed by the constant background term; then blur is applied,
the background added, every pixel replaced by an independent Poisson draw, and
the result renormalized to peak intensity one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegradationError, GridShapeError
from .grids import ImageGrid, as_field
from .operators import BccbOperator


@dataclass(eq=False)
class PsfKernel:
    """An odd-sized nonnegative 2-D blur kernel."""

    weights: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("PSF weights must form a 2-D array")
        if any(s % 2 == 0 for s in self.weights.shape):
            raise ValueError(f"PSF size must be odd, got {self.weights.shape}")
        if np.any(self.weights < 0):
            raise ValueError("PSF weights must be nonnegative")
        if self.normalized and abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("normalized PSF weights must sum to 1 within 1e-12")

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape


@dataclass
class DegradationConfig:
    """Blur choice, SNR target, background level and RNG seed for one run."""

    psf: PsfKernel | None = None
    target_snr: float = 43.0
    gamma_const: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if not math.isfinite(self.target_snr):
            raise ValueError("target_snr must be finite")
        if not (self.gamma_const > 0):
            raise ValueError("gamma_const must be positive")


def gaussian_psf(variance: float, size: int) -> PsfKernel:
    """Isotropic Gaussian kernel on a centered size x size lattice, sum one."""
    if size % 2 == 0:
        raise ValueError(f"PSF size must be odd, got {size}")
    if not (variance > 0):
        raise ValueError(f"variance must be positive, got {variance}")
    half = size // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    sq = ax[:, None] ** 2 + ax[None, :] ** 2
    w = np.exp(-sq / (2.0 * variance))
    return PsfKernel(w / w.sum())


def out_of_focus_psf(radius: float, size: int, subsamples: int = 8) -> PsfKernel:
    """Uniform disk kernel with fractional boundary weights, sum one.

    Boundary pixels are weighted by the fraction of subsamples x subsamples
    subpixel points falling inside the disk.
    """
    if size % 2 == 0:
        raise ValueError(f"PSF size must be odd, got {size}")
    if not (radius > 0):
        raise ValueError(f"radius must be positive, got {radius}")
    if size < 2 * radius + 1:
        raise ValueError(f"size {size} too small for radius {radius}")
    half = size // 2
    offs = (np.arange(subsamples) + 0.5) / subsamples - 0.5
    centers = np.arange(-half, half + 1, dtype=np.float64)
    xs = (centers[:, None] + offs[None, :]).ravel()   # subpixel coordinates
    d2 = xs[:, None] ** 2 + xs[None, :] ** 2
    inside = (d2 <= radius * radius).astype(np.float64)
    w = inside.reshape(size, subsamples, size, subsamples).sum(axis=(1, 3))
    total = w.sum()
    if total <= 0:
        raise ValueError("disk kernel is empty; increase radius or subsamples")
    return PsfKernel(w / total)


def make_stripe_phantom(height: int, width: int, theta_true: float,
                        profile: str = "affine", num_stripes: int = 16,
                        seed: int = 0) -> ImageGrid:
    """Synthetic directional image: stripes of random width and intensity.

    The intensity is constant along the direction (cos theta, sin theta) in
    (column, row) index space and varies across it: piecewise constant, or
    piecewise affine ramps when ``profile == "affine"``.  Values lie in [0, 1]
    and the construction is a pure function of the seed.
    """
    if num_stripes < 2:
        raise ValueError(f"need at least 2 stripes, got {num_stripes}")
    if profile not in ("affine", "constant"):
        raise ValueError(f"unknown profile {profile!r}")
    rng = np.random.default_rng(seed)
    rows, cols = np.indices((height, width), dtype=np.float64)
    # cross-stripe coordinate: constant along the texture direction
    s = (-math.sin(theta_true) * (cols - (width - 1) / 2.0)
         + math.cos(theta_true) * (rows - (height - 1) / 2.0))
    s_min, s_max = float(s.min()), float(s.max())
    span = max(s_max - s_min, 1e-12)

    widths = rng.uniform(0.5, 1.5, num_stripes)
    edges = np.concatenate([[0.0], np.cumsum(widths)])
    edges = s_min + edges / edges[-1] * span
    idx = np.clip(np.searchsorted(edges[1:-1], s, side="right"), 0, num_stripes - 1)

    # alternate bright and dark bands so every boundary carries contrast
    base = np.where(np.arange(num_stripes) % 2 == 0,
                    rng.uniform(0.55, 0.95, num_stripes),
                    rng.uniform(0.05, 0.45, num_stripes))
    if profile == "affine":
        drift = rng.uniform(-0.35, 0.35, num_stripes)
        start = edges[:-1]
        length = np.maximum(edges[1:] - edges[:-1], 1e-12)
        frac = (s - start[idx]) / length[idx]
        values = base[idx] + drift[idx] * frac
    else:
        values = base[idx]
    return ImageGrid.from_matrix(np.clip(values, 0.0, 1.0))


def _snr_db(total_signal: float, total_background: float) -> float:
    return 10.0 * math.log10(total_signal / math.sqrt(total_signal + total_background))


def solve_photon_scale(total_signal: float, total_background: float,
                       target_snr: float) -> float:
    """Scale s with SNR(s * signal, background) = target, by bisection.

    The SNR is strictly increasing in s, so a sign change brackets the root.
    """
    if not (total_signal > 0):
        raise DegradationError("image carries no photons; SNR target unreachable")
    lo, hi = -30.0, 1.0  # log10 of the scale
    for _ in range(200):
        if _snr_db(10.0 ** hi * total_signal, total_background) >= target_snr:
            break
        hi += 3.0
    else:
        raise DegradationError(f"SNR target {target_snr} dB unreachable")
    if _snr_db(10.0 ** lo * total_signal, total_background) > target_snr:
        raise DegradationError(f"SNR target {target_snr} dB unreachable (too low)")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _snr_db(10.0 ** mid * total_signal, total_background) < target_snr:
            lo = mid
        else:
            hi = mid
    return 10.0 ** (0.5 * (lo + hi))


def degrade(u_true: ImageGrid, config: DegradationConfig,
            blur: BccbOperator) -> tuple[ImageGrid, float]:
    """Blur, count-scale, Poisson-sample and renormalize a clean image.

    Returns the degraded image (peak value 1 unless the sample is all zero)
    and the photon scale that met the SNR target.
    """
    u2 = as_field(u_true)
    if np.any(u2 < 0):
        raise DegradationError("clean image must be nonnegative")
    if u2.shape != (blur.height, blur.width):
        raise GridShapeError(
            f"blur operator {blur.height}x{blur.width} does not match image {u2.shape}")
    au = blur.apply(ImageGrid.from_matrix(u2)).to_matrix()
    au = np.maximum(au, 0.0)  # clip FFT roundoff
    total_signal = float(au.sum())
    total_background = config.gamma_const * u2.size
    scale = solve_photon_scale(total_signal, total_background, config.target_snr)

    rng = np.random.default_rng(config.seed)
    counts = rng.poisson(scale * au + config.gamma_const).astype(np.float64)
    peak = counts.max()
    if peak > 0:
        counts /= peak
    return ImageGrid.from_matrix(counts), scale
