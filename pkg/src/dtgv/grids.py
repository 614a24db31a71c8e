"""Pixel grids and stacked gradient-like fields.

Every image is a real vector with a single global vectorization convention:
column-major, i.e. pixel (row r, col c) maps to index c*height + r.  Stacked
fields keep that convention block by block, so a 2-stack of length 2n holds
blocks [0, n) and [n, 2n), each an image in its own right.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridShapeError


def _as_finite_vector(data, n: int, what: str) -> np.ndarray:
    vec = np.ascontiguousarray(data, dtype=np.float64).ravel()
    if vec.size != n:
        raise GridShapeError(f"{what}: expected {n} values, got {vec.size}")
    if not np.all(np.isfinite(vec)):
        raise GridShapeError(f"{what}: data contains non-finite values")
    return vec


@dataclass(eq=False)
class ImageGrid:
    """A height x width grayscale image stored as a flat column-major vector."""

    height: int
    width: int
    data: np.ndarray

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise GridShapeError(f"invalid grid {self.height}x{self.width}")
        self.data = _as_finite_vector(self.data, self.height * self.width, "ImageGrid")

    @property
    def n(self) -> int:
        return self.height * self.width

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @classmethod
    def from_matrix(cls, matrix) -> "ImageGrid":
        m = np.asarray(matrix, dtype=np.float64)
        if m.ndim != 2:
            raise GridShapeError(f"expected a 2-D array, got ndim={m.ndim}")
        return cls(m.shape[0], m.shape[1], m.ravel(order="F"))

    def to_matrix(self) -> np.ndarray:
        return self.data.reshape(self.shape, order="F")


@dataclass(eq=False)
class StackedField2:
    """Two image-shaped blocks stacked into one vector of length 2n."""

    height: int
    width: int
    data: np.ndarray

    def __post_init__(self):
        n = self.height * self.width
        self.data = _as_finite_vector(self.data, 2 * n, "StackedField2")

    @property
    def n(self) -> int:
        return self.height * self.width

    def block(self, i: int) -> np.ndarray:
        n = self.n
        return self.data[i * n:(i + 1) * n]

    @classmethod
    def from_stack(cls, stack) -> "StackedField2":
        """Build from an array of shape (2, height, width)."""
        s = np.asarray(stack, dtype=np.float64)
        if s.ndim != 3 or s.shape[0] != 2:
            raise GridShapeError(f"expected shape (2, H, W), got {s.shape}")
        data = np.concatenate([s[i].ravel(order="F") for i in range(2)])
        return cls(s.shape[1], s.shape[2], data)

    def to_stack(self) -> np.ndarray:
        return np.stack([self.block(i).reshape(self.height, self.width, order="F")
                         for i in range(2)])


@dataclass(eq=False)
class StackedField4:
    """Four image-shaped blocks stacked into one vector of length 4n."""

    height: int
    width: int
    data: np.ndarray

    def __post_init__(self):
        n = self.height * self.width
        self.data = _as_finite_vector(self.data, 4 * n, "StackedField4")

    @property
    def n(self) -> int:
        return self.height * self.width

    def block(self, i: int) -> np.ndarray:
        n = self.n
        return self.data[i * n:(i + 1) * n]

    @classmethod
    def from_stack(cls, stack) -> "StackedField4":
        """Build from an array of shape (4, height, width)."""
        s = np.asarray(stack, dtype=np.float64)
        if s.ndim != 3 or s.shape[0] != 4:
            raise GridShapeError(f"expected shape (4, H, W), got {s.shape}")
        data = np.concatenate([s[i].ravel(order="F") for i in range(4)])
        return cls(s.shape[1], s.shape[2], data)

    def to_stack(self) -> np.ndarray:
        return np.stack([self.block(i).reshape(self.height, self.width, order="F")
                         for i in range(4)])


def same_shape(a, b) -> None:
    """Raise GridShapeError unless the two grid-shaped objects agree in (height, width)."""
    if (a.height, a.width) != (b.height, b.width):
        raise GridShapeError(
            f"shape mismatch: {a.height}x{a.width} vs {b.height}x{b.width}")


def as_field(image, height: int | None = None, width: int | None = None) -> np.ndarray:
    """Coerce an ImageGrid / 2-D array / scalar to a 2-D float64 array."""
    if isinstance(image, ImageGrid):
        return image.to_matrix()
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 0:
        if height is None or width is None:
            raise GridShapeError("scalar field needs explicit grid dimensions")
        return np.full((height, width), float(arr))
    if arr.ndim != 2:
        raise GridShapeError(f"expected a 2-D field, got ndim={arr.ndim}")
    return arr
