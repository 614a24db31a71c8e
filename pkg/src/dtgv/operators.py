"""Periodic finite-difference and blur operators stored as DFT spectra.

With periodic boundary conditions every operator used here (blur, forward
differences, their rotated combinations) is block circulant with circulant
blocks, hence diagonalized by the two-dimensional DFT.  An operator is kept
as its frequency symbol: a complex (H, W) array whose column-major flattening
is the diagonal of the transformed operator, zero frequency at entry (0, 0).

Applying an operator costs two transforms and one pointwise product:

    L v = idft2( spectrum * dft2(v) )

The forward transform is unnormalized, the inverse carries the 1/n factor
(numpy/scipy default), which is exactly the convention under which the
convolution theorem needs no extra scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import GridShapeError, SpectrumError
from .grids import ImageGrid, StackedField2, StackedField4, same_shape

#: Maximum imaginary leakage, relative to the input norm, tolerated when a
#: real-stencil operator is applied through its spectrum.
IMAG_RESIDUE_TOL = 1e-10


@dataclass(eq=False)
class BccbOperator:
    """A circular-convolution operator represented by its 2-D DFT spectrum."""

    height: int
    width: int
    spectrum: np.ndarray  # complex, shape (height, width), zero frequency at [0, 0]

    def __post_init__(self):
        self.spectrum = np.ascontiguousarray(self.spectrum, dtype=np.complex128)
        if self.spectrum.shape != (self.height, self.width):
            raise GridShapeError(
                f"spectrum shape {self.spectrum.shape} does not match grid "
                f"{self.height}x{self.width}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def _apply_spectrum(self, sym: np.ndarray, field: np.ndarray) -> np.ndarray:
        out = sfft.ifft2(sym * sfft.fft2(field))
        resid = np.linalg.norm(out.imag)
        bound = IMAG_RESIDUE_TOL * max(np.linalg.norm(field), 1e-300)
        if resid > bound:
            raise SpectrumError(
                f"imaginary residue {resid:.3e} exceeds {bound:.3e}; "
                "spectrum is not consistent with a real stencil")
        return out.real

    def apply(self, u: ImageGrid) -> ImageGrid:
        same_shape(self, u)
        return ImageGrid.from_matrix(self._apply_spectrum(self.spectrum, u.to_matrix()))

    def apply_adjoint(self, u: ImageGrid) -> ImageGrid:
        """Apply the transpose; for a real BCCB matrix that is the conjugate spectrum."""
        same_shape(self, u)
        return ImageGrid.from_matrix(
            self._apply_spectrum(np.conj(self.spectrum), u.to_matrix()))


@dataclass(frozen=True)
class DirectionalSpec:
    """Texture direction (radians) and the cross-direction scaling weight."""

    theta: float
    a: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.theta) or abs(self.theta) > math.pi + 1e-12:
            raise ValueError(f"theta must lie in [-pi, pi], got {self.theta}")
        if not (self.a > 0):
            raise ValueError(f"scaling parameter a must be positive, got {self.a}")


def make_forward_diff_spectra(height: int, width: int) -> tuple[BccbOperator, BccbOperator]:
    """Forward differences along the horizontal (column) and vertical (row) axes.

    d_h acts as (d_h u)(r, c) = u(r, c+1 mod W) - u(r, c) and d_v analogously
    down the rows; both wrap periodically.  Their symbols are exp(2*pi*i*k/W)-1
    and exp(2*pi*i*j/H)-1, zero at zero frequency (constants are annihilated).
    """
    if height < 2 or width < 2:
        raise GridShapeError(f"invalid grid {height}x{width}: need at least 2x2")
    col_phase = np.exp(2j * np.pi * np.arange(width) / width) - 1.0
    row_phase = np.exp(2j * np.pi * np.arange(height) / height) - 1.0
    d_h = BccbOperator(height, width, np.tile(col_phase, (height, 1)))
    d_v = BccbOperator(height, width, np.tile(row_phase[:, None], (1, width)))
    return d_h, d_v


def make_directional_spectra(d_h: BccbOperator, d_v: BccbOperator,
                             spec: DirectionalSpec) -> tuple[BccbOperator, BccbOperator]:
    """Rotate the axis-aligned differences to the texture frame.

    Returns the derivative along the texture direction,
    cos(theta)*d_h + sin(theta)*d_v, and the scaled derivative across it,
    a*(-sin(theta)*d_h + cos(theta)*d_v).
    """
    same_shape(d_h, d_v)
    ct, st = math.cos(spec.theta), math.sin(spec.theta)
    along = BccbOperator(d_h.height, d_h.width, ct * d_h.spectrum + st * d_v.spectrum)
    across = BccbOperator(d_h.height, d_h.width,
                          spec.a * (-st * d_h.spectrum + ct * d_v.spectrum))
    return along, across


@dataclass(eq=False)
class DirectionalOperators:
    """The rotated derivative pair acting on one grid."""

    d_theta: BccbOperator
    d_perp: BccbOperator

    def __post_init__(self):
        same_shape(self.d_theta, self.d_perp)

    @property
    def height(self) -> int:
        return self.d_theta.height

    @property
    def width(self) -> int:
        return self.d_theta.width


def make_directional_operators(height: int, width: int,
                               spec: DirectionalSpec) -> DirectionalOperators:
    d_h, d_v = make_forward_diff_spectra(height, width)
    d_theta, d_perp = make_directional_spectra(d_h, d_v, spec)
    return DirectionalOperators(d_theta, d_perp)


# ---------------------------------------------------------------------------
# gradient and symmetrized derivative
# ---------------------------------------------------------------------------

def _grad_stack(u2d: np.ndarray, ops: DirectionalOperators) -> np.ndarray:
    uh = sfft.fft2(u2d)
    g1 = sfft.ifft2(ops.d_theta.spectrum * uh)
    g2 = sfft.ifft2(ops.d_perp.spectrum * uh)
    _check_residue(np.stack([g1, g2]), u2d)
    return np.stack([g1.real, g2.real])


def _check_residue(out_complex: np.ndarray, input_field: np.ndarray) -> None:
    resid = np.linalg.norm(out_complex.imag)
    bound = IMAG_RESIDUE_TOL * max(np.linalg.norm(input_field), 1e-300)
    if resid > bound:
        raise SpectrumError(
            f"imaginary residue {resid:.3e} exceeds {bound:.3e}")


def apply_grad(u: ImageGrid, ops: DirectionalOperators) -> StackedField2:
    """Stack the along- and across-texture derivatives of u."""
    same_shape(ops.d_theta, u)
    return StackedField2.from_stack(_grad_stack(u.to_matrix(), ops))


def apply_grad_adjoint(v: StackedField2, ops: DirectionalOperators) -> ImageGrid:
    """Transpose of apply_grad: d_theta^T v1 + d_perp^T v2."""
    same_shape(ops.d_theta, v)
    s = v.to_stack()
    out = (sfft.ifft2(np.conj(ops.d_theta.spectrum) * sfft.fft2(s[0]))
           + sfft.ifft2(np.conj(ops.d_perp.spectrum) * sfft.fft2(s[1])))
    _check_residue(out, s)
    return ImageGrid.from_matrix(out.real)


def apply_sym_derivative(w: StackedField2, ops: DirectionalOperators) -> StackedField4:
    """Symmetrized second-level derivative of the auxiliary field.

    Block structure (blocks 2 and 3 are the same mixed derivative):

        (d_theta w1,
         (d_perp w1 + d_theta w2) / 2,
         (d_perp w1 + d_theta w2) / 2,
         d_perp w2)
    """
    same_shape(ops.d_theta, w)
    s = w.to_stack()
    w1h, w2h = sfft.fft2(s[0]), sfft.fft2(s[1])
    st, sp = ops.d_theta.spectrum, ops.d_perp.spectrum
    e1 = sfft.ifft2(st * w1h)
    e_mid = sfft.ifft2(0.5 * (sp * w1h + st * w2h))
    e4 = sfft.ifft2(sp * w2h)
    _check_residue(np.stack([e1, e_mid, e4]), s)
    return StackedField4.from_stack(np.stack([e1.real, e_mid.real, e_mid.real, e4.real]))


def apply_sym_derivative_adjoint(y: StackedField4, ops: DirectionalOperators) -> StackedField2:
    """Transpose of apply_sym_derivative."""
    same_shape(ops.d_theta, y)
    s = y.to_stack()
    y1h, y2h, y3h, y4h = (sfft.fft2(s[i]) for i in range(4))
    ct, cp = np.conj(ops.d_theta.spectrum), np.conj(ops.d_perp.spectrum)
    mid = 0.5 * (y2h + y3h)
    out1 = sfft.ifft2(ct * y1h + cp * mid)
    out2 = sfft.ifft2(ct * mid + cp * y4h)
    _check_residue(np.stack([out1, out2]), s)
    return StackedField2.from_stack(np.stack([out1.real, out2.real]))


# ---------------------------------------------------------------------------
# (2,1)-norms
# ---------------------------------------------------------------------------

def norm21_of_stack(stack: np.ndarray) -> float:
    """Sum over pixels of the euclidean norm across the leading axis."""
    return float(np.sqrt(np.sum(stack * stack, axis=0)).sum())


def norm21_2(v: StackedField2) -> float:
    """Sum over pixels j of sqrt(v_j^2 + v_{n+j}^2)."""
    return norm21_of_stack(np.stack([v.block(0), v.block(1)]))


def norm21_4(y: StackedField4) -> float:
    """Sum over pixels j of the norm of the stacked 4-vector at j."""
    return norm21_of_stack(np.stack([y.block(i) for i in range(4)]))


# ---------------------------------------------------------------------------
# blur
# ---------------------------------------------------------------------------

def embed_kernel(weights: np.ndarray, height: int, width: int) -> np.ndarray:
    """Place a small odd-sized kernel at the grid origin with circular wrap."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2:
        raise GridShapeError("kernel must be 2-D")
    kh, kw = w.shape
    if kh > height or kw > width:
        raise GridShapeError(
            f"kernel {kh}x{kw} does not fit within grid {height}x{width}")
    rows = (np.arange(kh) - kh // 2) % height
    cols = (np.arange(kw) - kw // 2) % width
    grid = np.zeros((height, width))
    grid[np.ix_(rows, cols)] = w
    return grid


def make_blur_operator(psf, height: int, width: int) -> BccbOperator:
    """Build the periodic blur operator for a point-spread function.

    Accepts a PsfKernel or a bare 2-D weight array; the kernel center lands
    on pixel (0, 0) so the operator has zero phase at zero frequency and its
    zero-frequency entry equals the kernel sum (1 for a normalized PSF).
    """
    weights = np.asarray(getattr(psf, "weights", psf), dtype=np.float64)
    if np.any(weights < 0):
        raise ValueError("PSF weights must be nonnegative")
    return BccbOperator(height, width, sfft.fft2(embed_kernel(weights, height, width)))


def identity_operator(height: int, width: int) -> BccbOperator:
    return BccbOperator(height, width, np.ones((height, width), dtype=np.complex128))
