"""Dominant texture-direction estimation.

Pipeline: Sobel edge magnitudes, Otsu binarization, a circular mask that
removes the corner regions (long diagonals would otherwise dominate the
vote), a line-detection accumulator over (offset, angle), and a per-angle
score equal to the squared two-norm of the accumulator column.  The winning
angle eta (degrees) maps to the texture direction as

    theta = (90 - eta) * pi / 180   for eta >= 0,
    theta = (-90 - eta) * pi / 180  otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import GridShapeError, NoDirectionError
from .grids import ImageGrid

ETA_DEGREES = np.arange(-90, 90)  # one accumulator column per integer degree


@dataclass(eq=False)
class EdgeImage:
    height: int
    width: int
    magnitude: np.ndarray  # (H, W), nonnegative
    flags: np.ndarray      # (H, W), bool

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(eq=False)
class HoughAccumulator:
    """Vote counts over (line offset r, line-normal angle eta)."""

    r_max: int
    counts: np.ndarray  # (2*r_max + 1, 180)

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.r_max, self.r_max + 1)

    @property
    def etas(self) -> np.ndarray:
        return ETA_DEGREES


@dataclass(eq=False)
class DirectionEstimate:
    theta: float      # radians
    eta_max: int      # degrees
    scores: np.ndarray  # (180,)
    edges: EdgeImage | None = None
    masked_edges: EdgeImage | None = None
    accumulator: HoughAccumulator | None = None

    @property
    def theta_degrees(self) -> float:
        return float(np.rad2deg(self.theta))


def otsu_threshold(values: np.ndarray, bins: int = 256) -> float:
    """Threshold maximizing the between-class variance of a 256-bin histogram."""
    v = np.asarray(values, dtype=np.float64).ravel()
    vmin, vmax = float(v.min()), float(v.max())
    if vmin == vmax:
        return vmin
    counts, edges = np.histogram(v, bins=bins, range=(vmin, vmax))
    centers = 0.5 * (edges[:-1] + edges[1:])
    p = counts / counts.sum()
    w0 = np.cumsum(p)
    w1 = 1.0 - w0
    m = np.cumsum(p * centers)
    m_total = m[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = m / w0
        mu1 = (m_total - m) / w1
        between = w0 * w1 * (mu0 - mu1) ** 2
    between[~np.isfinite(between)] = 0.0
    return float(centers[int(np.argmax(between))])


def sobel_edges(b: ImageGrid) -> EdgeImage:
    """Sobel gradient magnitude, binarized by Otsu's threshold.

    Boundary rows/columns are replicated; a constant image yields an all-zero
    edge image rather than an error.
    """
    if b.height < 3 or b.width < 3:
        raise GridShapeError(f"grid {b.height}x{b.width} too small for 3x3 stencils")
    img = b.to_matrix()
    gx = ndimage.sobel(img, axis=1, mode="nearest")
    gy = ndimage.sobel(img, axis=0, mode="nearest")
    magnitude = np.hypot(gx, gy)
    flags = magnitude > otsu_threshold(magnitude)
    return EdgeImage(b.height, b.width, magnitude, flags)


def apply_disk_mask(e: EdgeImage) -> EdgeImage:
    """Zero out everything outside the largest centered circle.

    The circle is centered at ((H-1)/2, (W-1)/2) with radius min(H, W)/2;
    pixels strictly farther than the radius are removed.
    """
    rows, cols = np.indices(e.shape)
    cy, cx = (e.height - 1) / 2.0, (e.width - 1) / 2.0
    inside = np.hypot(rows - cy, cols - cx) <= min(e.height, e.width) / 2.0
    return EdgeImage(e.height, e.width,
                     np.where(inside, e.magnitude, 0.0),
                     e.flags & inside)


def hough_transform(e: EdgeImage, weighted: bool = False) -> HoughAccumulator:
    """Accumulate line votes for the flagged edge pixels.

    Pixel coordinates are taken relative to the grid center with the second
    axis pointing up (decreasing row index); that orientation is what makes
    the eta -> theta mapping return the texture angle in the same convention
    the forward-difference operators use.  Each flagged pixel adds one vote
    (its magnitude when ``weighted``) at r = round(x cos eta + y sin eta)
    in every angle column.
    """
    r_max = int(np.ceil(np.hypot(e.height, e.width) / 2.0))
    n_bins = 2 * r_max + 1
    counts = np.zeros((n_bins, ETA_DEGREES.size))
    rows, cols = np.nonzero(e.flags)
    if rows.size == 0:
        return HoughAccumulator(r_max, counts)
    # Integer center: with a half-integer origin on even grids, round-half-to-
    # even merges pairs of axis-aligned lines into shared bins, inflating the
    # eta = 0 / -90 scores enough to beat real oblique structure.
    x = (cols - e.width // 2).astype(np.float64)
    y = (e.height // 2 - rows).astype(np.float64)
    votes = e.magnitude[rows, cols] if weighted else np.ones(rows.size)
    for j, eta in enumerate(np.deg2rad(ETA_DEGREES)):
        r = np.rint(x * np.cos(eta) + y * np.sin(eta)).astype(np.int64) + r_max
        counts[:, j] = np.bincount(r, weights=votes, minlength=n_bins)
    return HoughAccumulator(r_max, counts)


def angle_scores(h: HoughAccumulator) -> np.ndarray:
    """Squared two-norm of each accumulator column, one score per degree."""
    return np.sum(h.counts * h.counts, axis=0)


def eta_to_theta(eta_degrees: float) -> float:
    """Map a winning normal angle (degrees) to the texture direction (radians)."""
    if eta_degrees >= 0:
        return (90.0 - eta_degrees) * np.pi / 180.0
    return (-90.0 - eta_degrees) * np.pi / 180.0


def _argmax_eta(scores: np.ndarray) -> int:
    best = np.flatnonzero(scores == scores.max())
    etas = ETA_DEGREES[best]
    # ties: prefer the smallest |eta|, then the positive sign
    order = np.lexsort((etas <= 0, np.abs(etas)))
    return int(etas[order[0]])


def estimate_direction(b: ImageGrid, weighted: bool = False,
                       keep_stages: bool = False) -> DirectionEstimate:
    """Estimate the dominant texture direction of an image.

    Raises NoDirectionError when the score curve is identically zero (blank
    or structureless input).
    """
    edges = sobel_edges(b)
    masked = apply_disk_mask(edges)
    acc = hough_transform(masked, weighted=weighted)
    scores = angle_scores(acc)
    if not np.any(scores > 0):
        raise NoDirectionError("no dominant direction: the score curve is all zero")
    eta_max = _argmax_eta(scores)
    est = DirectionEstimate(theta=eta_to_theta(eta_max), eta_max=eta_max, scores=scores)
    if keep_stages:
        est.edges = edges
        est.masked_edges = masked
        est.accumulator = acc
    return est
