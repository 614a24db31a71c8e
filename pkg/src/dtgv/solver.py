"""ADMM solver for Poisson-likelihood deblurring with directional second-order TV.

The model couples a Kullback-Leibler data term with a two-level directional
regularizer through consensus variables:

    minimize  lam * KL(A u + bg, b)
              + alpha0 * ||grad u - w||_{2,1} + alpha1 * ||sym w||_{2,1}
    s.t.      u >= 0

split as z1 = A u, z2 = grad u - w, z3 = sym w, z4 = u.  Each ADMM sweep
solves four pointwise proximal problems exactly (a quadratic root for the
KL block, group shrinkage for the two (2,1)-norm blocks, a projection for
the nonnegativity block), updates the scaled multipliers, and solves the
coupled least-squares problem in (u, w) exactly in the frequency domain,
where every operator block is diagonal.  The frequency factors are computed
once per solve; each iteration then costs a fixed number of FFTs plus
pointwise arithmetic.

The loop runs in the shifted order (z, multipliers, then x) with u0 set to
the observed image, w0 to its directional gradient, and z0 = mu0 = 0.  It
stops when the relative change of u drops below ``tol`` or after ``k_max``
iterations.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft as sfft

from .errors import DivergenceError, DomainError, SingularFactorError
from .grids import ImageGrid, StackedField2, StackedField4, as_field
from .operators import (BccbOperator, DirectionalOperators, DirectionalSpec,
                        identity_operator, make_blur_operator,
                        make_directional_operators, norm21_of_stack)

_DET_FLOOR = 1e-14


@dataclass
class SolverConfig:
    """All solver tunables.

    alpha0/alpha1 weight the first- and second-level regularizer terms and
    must lie in (0, 1); the common parameterization alpha0 = beta,
    alpha1 = 1 - beta with beta = 2/3 is the default.  ``gamma`` is the
    (strictly positive) background term, a scalar or a per-pixel field.
    """

    lam: float
    theta: float = 0.0
    a: float = 1.0
    alpha0: float = 2.0 / 3.0
    alpha1: float = 1.0 / 3.0
    rho: float = 10.0
    tol: float = 1e-4
    k_max: int = 500
    gamma: float | np.ndarray = 1e-10

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lam must be positive, got {self.lam}")
        for name in ("alpha0", "alpha1"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if not (self.rho > 0):
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not (0.0 < self.tol < 1.0):
            raise ValueError(f"tol must lie in (0, 1), got {self.tol}")
        if self.k_max < 1:
            raise ValueError(f"k_max must be at least 1, got {self.k_max}")
        if np.ndim(self.gamma) == 0 and not (float(self.gamma) > 0):
            raise ValueError("gamma must be positive")
        DirectionalSpec(self.theta, self.a)  # validates theta and a

    def direction(self) -> DirectionalSpec:
        return DirectionalSpec(self.theta, self.a)

    def with_lambda(self, lam: float) -> "SolverConfig":
        return replace(self, lam=lam)


def tgv_config(lam: float, **kwargs) -> SolverConfig:
    """Config for the non-directional (axis-aligned) variant: theta=0, a=1."""
    kwargs.pop("theta", None)
    kwargs.pop("a", None)
    return SolverConfig(lam=lam, theta=0.0, a=1.0, **kwargs)


@dataclass(eq=False)
class ProblemOperators:
    """The blur operator and the rotated derivative pair for one problem."""

    blur: BccbOperator
    grad: DirectionalOperators

    @classmethod
    def build(cls, height: int, width: int, direction: DirectionalSpec,
              psf=None) -> "ProblemOperators":
        blur = (identity_operator(height, width) if psf is None
                else make_blur_operator(psf, height, width))
        return cls(blur, make_directional_operators(height, width, direction))

    @property
    def height(self) -> int:
        return self.blur.height

    @property
    def width(self) -> int:
        return self.blur.width


# ---------------------------------------------------------------------------
# consensus-space block vectors
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class BlockVector:
    """A consensus-space vector split as (n, 2n, 4n, n) image-shaped blocks."""

    b1: np.ndarray  # (H, W)
    b2: np.ndarray  # (2, H, W)
    b3: np.ndarray  # (4, H, W)
    b4: np.ndarray  # (H, W)

    @classmethod
    def zeros(cls, height: int, width: int) -> "BlockVector":
        return cls(np.zeros((height, width)), np.zeros((2, height, width)),
                   np.zeros((4, height, width)), np.zeros((height, width)))

    @classmethod
    def from_flat(cls, vec: np.ndarray, height: int, width: int) -> "BlockVector":
        """Split a flat 8n vector laid out column-major block by block."""
        vec = np.asarray(vec, dtype=np.float64)
        n = height * width
        if vec.size != 8 * n:
            raise ValueError(f"expected length {8 * n}, got {vec.size}")
        parts = [vec[i * n:(i + 1) * n].reshape(height, width, order="F")
                 for i in range(8)]
        return cls(parts[0], np.stack(parts[1:3]), np.stack(parts[3:7]), parts[7])

    def to_flat(self) -> np.ndarray:
        blocks = [self.b1] + list(self.b2) + list(self.b3) + [self.b4]
        return np.concatenate([blk.ravel(order="F") for blk in blocks])

    def copy(self) -> "BlockVector":
        return BlockVector(self.b1.copy(), self.b2.copy(), self.b3.copy(),
                           self.b4.copy())

    def __add__(self, other: "BlockVector") -> "BlockVector":
        return BlockVector(self.b1 + other.b1, self.b2 + other.b2,
                           self.b3 + other.b3, self.b4 + other.b4)

    def __sub__(self, other: "BlockVector") -> "BlockVector":
        return BlockVector(self.b1 - other.b1, self.b2 - other.b2,
                           self.b3 - other.b3, self.b4 - other.b4)

    def norm(self) -> float:
        return math.sqrt(sum(float(np.sum(b * b))
                             for b in (self.b1, self.b2, self.b3, self.b4)))

    def isfinite(self) -> bool:
        return all(bool(np.isfinite(b).all())
                   for b in (self.b1, self.b2, self.b3, self.b4))


def apply_constraint_operator(u, w, operators: ProblemOperators) -> BlockVector:
    """Map x = (u, w) to its consensus blocks (A u, grad u - w, sym w, u)."""
    u2 = as_field(u)
    ws = w.to_stack() if isinstance(w, StackedField2) else np.asarray(w, dtype=np.float64)
    sa = operators.blur.spectrum
    st = operators.grad.d_theta.spectrum
    sp = operators.grad.d_perp.spectrum
    wr = _spectral_width(u2.shape[1])
    uh = sfft.rfft2(u2)
    w1h, w2h = sfft.rfft2(ws[0]), sfft.rfft2(ws[1])
    return _constraint_blocks(u2, ws, uh, w1h, w2h,
                              sa[:, :wr], st[:, :wr], sp[:, :wr], u2.shape)


def _spectral_width(width: int) -> int:
    return width // 2 + 1


def _irfft2(spec: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    return sfft.irfft2(spec, s=shape)


def _constraint_blocks(u2, ws, uh, w1h, w2h, sa, st, sp, shape) -> BlockVector:
    au = _irfft2(sa * uh, shape)
    g1 = _irfft2(st * uh, shape)
    g2 = _irfft2(sp * uh, shape)
    e1 = _irfft2(st * w1h, shape)
    emid = _irfft2(0.5 * (sp * w1h + st * w2h), shape)
    e4 = _irfft2(sp * w2h, shape)
    return BlockVector(au, np.stack([g1 - ws[0], g2 - ws[1]]),
                       np.stack([e1, emid, emid, e4]), u2.copy())


def multiplier_update(mu: BlockVector, u, w, z: BlockVector,
                      operators: ProblemOperators) -> BlockVector:
    """Scaled-multiplier step: mu + (A u - z1, grad u - w - z2, sym w - z3, u - z4)."""
    return mu + apply_constraint_operator(u, w, operators) - z


# ---------------------------------------------------------------------------
# data term
# ---------------------------------------------------------------------------

def _kl_sum(v: np.ndarray, b: np.ndarray) -> float:
    """KL sum with the b=0 convention (log term dropped); assumes v > 0 where b > 0."""
    pos = b > 0
    total = float(np.sum(v) - np.sum(b))
    total += float(np.sum(b[pos] * np.log(b[pos] / v[pos])))
    return total


def kl_divergence(v, gamma, b) -> float:
    """Generalized Kullback-Leibler divergence of (v + gamma) from b.

    ``v`` stands for the blurred estimate (or its consensus copy); terms with
    b_i = 0 contribute (v + gamma)_i by convention.  Nonpositive entries of
    v + gamma or negative entries of b are domain errors.
    """
    v2 = as_field(v)
    b2 = as_field(b, *v2.shape)
    g2 = as_field(gamma, *v2.shape)
    arg = v2 + g2
    if np.any(arg <= 0):
        raise DomainError("kl_divergence: v + gamma must be positive elementwise")
    if np.any(b2 < 0):
        raise DomainError("kl_divergence: b must be nonnegative")
    return _kl_sum(arg, b2)


def objective(u, w, b, config: SolverConfig, operators: ProblemOperators) -> float:
    """Full variational objective lam*KL + alpha0*||grad u - w|| + alpha1*||sym w||."""
    hx = apply_constraint_operator(u, w, operators)
    fidelity = kl_divergence(hx.b1, config.gamma, b)
    return (config.lam * fidelity
            + config.alpha0 * norm21_of_stack(hx.b2)
            + config.alpha1 * norm21_of_stack(hx.b3))


# ---------------------------------------------------------------------------
# proximal maps (all pointwise, all exact)
# ---------------------------------------------------------------------------

def prox_kl(d, b, gamma, lam: float, rho: float):
    """Pointwise minimizer of lam*(-b*log(z+gamma) + z) + rho/2*(z-d)^2.

    The stationarity condition is the quadratic z^2 + beta*z + c = 0 with
    beta = lam/rho + gamma - d and c = (lam/rho)*(gamma - b) - gamma*d; the
    feasible (largest) root is returned via the cancellation-free q-form
    q = -(beta + sign(beta)*sqrt(disc))/2, using that the discriminant equals
    (gamma + d - lam/rho)^2 + 4*(lam/rho)*b >= 0 exactly.
    """
    d = np.asarray(d, dtype=np.float64)
    b_arr = np.asarray(b, dtype=np.float64)
    g_arr = np.asarray(gamma, dtype=np.float64)
    if np.any(b_arr < 0):
        raise DomainError("prox_kl: b must be nonnegative")
    if np.any(g_arr <= 0):
        raise DomainError("prox_kl: gamma must be positive")
    t = lam / rho
    beta = t + g_arr - d
    c = t * (g_arr - b_arr) - g_arr * d
    sq = np.sqrt((g_arr + d - t) ** 2 + 4.0 * t * b_arr)
    q = -0.5 * (beta + np.copysign(sq, beta))
    with np.errstate(divide="ignore", invalid="ignore"):
        other = np.where(q != 0.0, c / np.where(q != 0.0, q, 1.0), 0.0)
    z = np.where(beta >= 0.0, other, q)
    if z.ndim == 0:
        return float(z)
    return z


def prox_group_stack(d: np.ndarray, c: float, out: np.ndarray | None = None
                     ) -> np.ndarray:
    """Group shrinkage max{(||d_j|| - c)/||d_j||, 0} * d_j across the leading axis.

    Implemented branch-free as (1 - c / max(||d_j||, c)) * d_j, which is the
    same map and yields exact zeros whenever ||d_j|| <= c.
    """
    d = np.asarray(d, dtype=np.float64)
    mag = np.sqrt(np.einsum("i...,i...->...", d, d))
    np.maximum(mag, c, out=mag)
    np.divide(c, mag, out=mag)
    np.subtract(1.0, mag, out=mag)
    return np.multiply(mag, d, out=out)


def _prox_group_typed(d, c, cls, nblocks):
    if isinstance(d, cls):
        out = prox_group_stack(d.to_stack(), c)
        return cls.from_stack(out)
    d = np.asarray(d, dtype=np.float64)
    if d.shape[0] != nblocks:
        raise ValueError(f"expected {nblocks} leading blocks, got shape {d.shape}")
    return prox_group_stack(d, c)


def prox_group2(d, c: float):
    """Shrink pixelwise 2-vectors gathered across the two blocks of d."""
    if not (c > 0):
        raise ValueError(f"shrinkage constant must be positive, got {c}")
    return _prox_group_typed(d, c, StackedField2, 2)


def prox_group4(d, c: float):
    """Shrink pixelwise 4-vectors gathered across the four blocks of d."""
    if not (c > 0):
        raise ValueError(f"shrinkage constant must be positive, got {c}")
    return _prox_group_typed(d, c, StackedField4, 4)


def project_nonneg(d):
    """Euclidean projection onto the nonnegative orthant (elementwise max with 0)."""
    if isinstance(d, ImageGrid):
        return ImageGrid(d.height, d.width, np.maximum(d.data, 0.0))
    return np.maximum(np.asarray(d, dtype=np.float64), 0.0)


# ---------------------------------------------------------------------------
# frequency-domain normal-equations factors
# ---------------------------------------------------------------------------

_FACTOR_FIELDS = ("dtheta", "dperp", "gamma_diag",
                  "psi11", "psi12", "psi21", "psi22", "xi_inv",
                  "ups11", "ups12", "ups21", "ups22",
                  "inv11", "inv12", "inv13", "inv21", "inv22", "inv23",
                  "inv31", "inv32", "inv33")


@dataclass(eq=False)
class SpectralFactors:
    """Precomputed per-frequency factors of the coupled least-squares matrix.

    Per frequency the 3x3 system matrix is

        [[ gamma_diag, -conj(dtheta), -conj(dperp) ],
         [ -dtheta,     phi11,         phi12        ],
         [ -dperp,      phi21,         phi22        ]]

    with gamma_diag = 1 + |sa|^2 + |dtheta|^2 + |dperp|^2 and the phi block the
    symbol of I + (sym derivative)^T (sym derivative).  psi is the inverse of
    the phi block, xi_inv the inverted Schur complement of the head entry, ups
    the inverted Schur complement of the phi block, and inv11..inv33 the nine
    entries of the 3x3 inverse assembled from those factors (the per-iteration
    solve applies them directly).
    """

    height: int
    width: int
    dtheta: np.ndarray
    dperp: np.ndarray
    gamma_diag: np.ndarray
    psi11: np.ndarray
    psi12: np.ndarray
    psi21: np.ndarray
    psi22: np.ndarray
    xi_inv: np.ndarray
    ups11: np.ndarray
    ups12: np.ndarray
    ups21: np.ndarray
    ups22: np.ndarray
    inv11: np.ndarray
    inv12: np.ndarray
    inv13: np.ndarray
    inv21: np.ndarray
    inv22: np.ndarray
    inv23: np.ndarray
    inv31: np.ndarray
    inv32: np.ndarray
    inv33: np.ndarray

    def sliced(self, wr: int) -> "SpectralFactors":
        """View of the factors restricted to the nonredundant rfft2 columns."""
        cut = {name: getattr(self, name)[:, :wr] for name in _FACTOR_FIELDS}
        return SpectralFactors(self.height, self.width, **cut)


def _invert_2x2(m11, m12, m21, m22, what: str):
    """Partitioned inverse of a 2x2 block of diagonal matrices (pointwise)."""
    det = m11 * m22 - m12 * m21
    if np.min(np.abs(det)) < _DET_FLOOR:
        raise SingularFactorError(f"{what}: 2x2 determinant below {_DET_FLOOR}")
    s1 = m11 - m12 * m21 / m22
    s2 = m22 - m21 * m12 / m11
    inv11 = 1.0 / s1
    inv22 = 1.0 / s2
    inv12 = -inv11 * m12 / m22
    inv21 = -inv22 * m21 / m11
    return inv11, inv12, inv21, inv22


def precompute_factors(blur: BccbOperator, d_theta: BccbOperator,
                       d_perp: BccbOperator) -> SpectralFactors:
    """Factor the normal-equations matrix once, frequency by frequency.

    The returned factors are verified on construction: the reassembled 3x3
    matrix times its claimed inverse must equal the identity to 1e-8 on a
    sample of frequencies (zero frequency always included).
    """
    sa, st, sp = blur.spectrum, d_theta.spectrum, d_perp.spectrum
    aa = np.abs(sa) ** 2
    tt = np.abs(st) ** 2
    pp = np.abs(sp) ** 2
    gamma_diag = 1.0 + aa + tt + pp
    phi11 = (1.0 + tt + 0.5 * pp).astype(np.complex128)
    phi12 = 0.5 * np.conj(sp) * st
    phi21 = np.conj(phi12)
    phi22 = (1.0 + 0.5 * tt + pp).astype(np.complex128)

    psi11, psi12, psi21, psi22 = _invert_2x2(phi11, phi12, phi21, phi22, "phi")

    # Schur complement of the head entry: xi = gamma_diag - delta* psi delta
    dpd = (np.conj(st) * (psi11 * st + psi12 * sp)
           + np.conj(sp) * (psi21 * st + psi22 * sp))
    xi = gamma_diag - dpd
    if np.min(np.abs(xi)) < _DET_FLOOR:
        raise SingularFactorError(f"xi entry below {_DET_FLOOR}")

    # Schur complement of the phi block: omega = phi - delta gamma^{-1} delta*
    ginv = 1.0 / gamma_diag
    om11 = phi11 - tt * ginv
    om12 = phi12 - st * np.conj(sp) * ginv
    om21 = phi21 - sp * np.conj(st) * ginv
    om22 = phi22 - pp * ginv
    ups11, ups12, ups21, ups22 = _invert_2x2(om11, om12, om21, om22, "omega")

    # assemble the nine inverse entries from the factored form once
    xi_inv = 1.0 / xi
    ct, cp = np.conj(st), np.conj(sp)
    factors = SpectralFactors(
        height=blur.height, width=blur.width, dtheta=st.copy(), dperp=sp.copy(),
        gamma_diag=gamma_diag, psi11=psi11, psi12=psi12, psi21=psi21, psi22=psi22,
        xi_inv=xi_inv, ups11=ups11, ups12=ups12, ups21=ups21, ups22=ups22,
        inv11=xi_inv.astype(np.complex128),
        inv12=xi_inv * (ct * psi11 + cp * psi21),
        inv13=xi_inv * (ct * psi12 + cp * psi22),
        inv21=(ups11 * st + ups12 * sp) * ginv,
        inv22=ups11, inv23=ups12,
        inv31=(ups21 * st + ups22 * sp) * ginv,
        inv32=ups21, inv33=ups22)
    _verify_factors(factors, sa)
    return factors


def _inverse_rows(f: SpectralFactors, sa, idx):
    """Rows of the claimed 3x3 inverse at the sampled frequencies."""
    st, sp = f.dtheta.ravel()[idx], f.dperp.ravel()[idx]
    ct, cp = np.conj(st), np.conj(sp)
    g = f.gamma_diag.ravel()[idx]
    psi = [f.psi11.ravel()[idx], f.psi12.ravel()[idx],
           f.psi21.ravel()[idx], f.psi22.ravel()[idx]]
    ups = [f.ups11.ravel()[idx], f.ups12.ravel()[idx],
           f.ups21.ravel()[idx], f.ups22.ravel()[idx]]
    xi_inv = f.xi_inv.ravel()[idx]
    one = np.ones_like(g, dtype=np.complex128)
    row1 = [xi_inv * one, xi_inv * (ct * psi[0] + cp * psi[2]),
            xi_inv * (ct * psi[1] + cp * psi[3])]
    row2 = [ups[0] * (st / g) + ups[1] * (sp / g), ups[0], ups[1]]
    row3 = [ups[2] * (st / g) + ups[3] * (sp / g), ups[2], ups[3]]
    return row1, row2, row3


def _verify_factors(f: SpectralFactors, sa: np.ndarray, samples: int = 128) -> None:
    n = f.height * f.width
    idx = np.unique(np.r_[0, np.linspace(0, n - 1, min(samples, n)).astype(int)])
    st, sp = f.dtheta.ravel()[idx], f.dperp.ravel()[idx]
    g = f.gamma_diag.ravel()[idx].astype(np.complex128)
    tt, pp = np.abs(st) ** 2, np.abs(sp) ** 2
    fwd = np.empty((idx.size, 3, 3), dtype=np.complex128)
    fwd[:, 0, 0] = g
    fwd[:, 0, 1] = -np.conj(st)
    fwd[:, 0, 2] = -np.conj(sp)
    fwd[:, 1, 0] = -st
    fwd[:, 2, 0] = -sp
    fwd[:, 1, 1] = 1.0 + tt + 0.5 * pp
    fwd[:, 1, 2] = 0.5 * np.conj(sp) * st
    fwd[:, 2, 1] = np.conj(fwd[:, 1, 2])
    fwd[:, 2, 2] = 1.0 + 0.5 * tt + pp
    r1, r2, r3 = _inverse_rows(f, sa, idx)
    inv = np.stack([np.stack(r1, axis=-1), np.stack(r2, axis=-1),
                    np.stack(r3, axis=-1)], axis=-2)
    err = np.abs(fwd @ inv - np.eye(3)).max()
    if err > 1e-8:
        raise SingularFactorError(
            f"factor self-check failed: reassembly error {err:.3e} > 1e-8")


def _solve_x_spectra(f: SpectralFactors, sa_conj, ct, cp,
                     v1h, v21h, v22h, v31h, vmidh, v34h, v4h):
    """Apply the precomputed per-frequency inverse to the transformed rhs.

    The inputs are the transformed blocks of v_x (the two identical middle
    blocks of the 4-stack already merged into ``vmidh``).  Assembles the
    normal-equations right-hand side H^T v_x in the frequency domain, then
    multiplies by the 3x3 inverse whose entries come from the block
    factorization [[xi_inv, 0], [0, ups]] @ [[I, delta* psi],
    [delta gamma^{-1}, I]] of [[gamma, -delta*], [-delta, phi]].
    """
    rhs1 = sa_conj * v1h + ct * v21h + cp * v22h + v4h
    rhs2 = ct * v31h + cp * vmidh - v21h
    rhs3 = ct * vmidh + cp * v34h - v22h
    y1 = f.inv11 * rhs1 + f.inv12 * rhs2 + f.inv13 * rhs3
    y2 = f.inv21 * rhs1 + f.inv22 * rhs2 + f.inv23 * rhs3
    y3 = f.inv31 * rhs1 + f.inv32 * rhs2 + f.inv33 * rhs3
    return y1, y2, y3


def solve_x_subproblem(v_x: BlockVector, factors: SpectralFactors,
                       operators: ProblemOperators) -> tuple[np.ndarray, np.ndarray]:
    """Exact least-squares update of (u, w) for a consensus target v_x.

    Solves the normal equations of min ||H x - v_x||^2 where H stacks the
    four constraint operators; returns u of shape (H, W) and w of shape
    (2, H, W).  The residual satisfies ||H^T H x - H^T v_x|| <= 1e-8 ||H^T v_x||.
    """
    shape = (factors.height, factors.width)
    wr = _spectral_width(shape[1])
    fs = factors.sliced(wr)
    sa_conj = np.conj(operators.blur.spectrum[:, :wr])
    y1, y2, y3 = _solve_x_spectra(
        fs, sa_conj, np.conj(fs.dtheta), np.conj(fs.dperp),
        sfft.rfft2(v_x.b1),
        sfft.rfft2(v_x.b2[0]), sfft.rfft2(v_x.b2[1]),
        sfft.rfft2(v_x.b3[0]), sfft.rfft2(0.5 * (v_x.b3[1] + v_x.b3[2])),
        sfft.rfft2(v_x.b3[3]),
        sfft.rfft2(v_x.b4))
    u = _irfft2(y1, shape)
    w = np.stack([_irfft2(y2, shape), _irfft2(y3, shape)])
    return u, w


# ---------------------------------------------------------------------------
# the ADMM loop
# ---------------------------------------------------------------------------

@dataclass
class SolveReport:
    """Per-iteration diagnostics plus final summary of one ADMM solve."""

    objective: list = field(default_factory=list)
    primal_residual: list = field(default_factory=list)
    relative_change: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    kl_guarded: list = field(default_factory=list)
    rmse_history: list | None = None
    iterations: int = 0
    stop_reason: str = ""
    total_seconds: float = 0.0
    final_objective: float = math.nan
    final_residual: float = math.nan
    final_residual_normalized: float = math.nan
    max_negativity: float = 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iteration,objective,residual,relative_change,seconds\n")
            for i in range(self.iterations):
                fh.write(f"{i + 1},{self.objective[i]!r},{self.primal_residual[i]!r},"
                         f"{self.relative_change[i]!r},{self.seconds[i]!r}\n")


def _check_finite(k: int, *arrays) -> None:
    for arr in arrays:
        if not np.isfinite(arr).all():
            raise DivergenceError(f"non-finite iterate at iteration {k}")


def run_admm(b, config: SolverConfig, operators: ProblemOperators | None = None,
             reference=None, callback=None) -> tuple[ImageGrid, SolveReport]:
    """Restore an image from blurred Poisson-noisy data.

    b may be an ImageGrid or a 2-D array of nonnegative values.  When
    ``operators`` is omitted the blur is the identity and the derivative pair
    is built from config.theta / config.a.  ``reference`` (optional clean
    image) adds an RMSE trace to the report; ``callback(k, u, w, z, mu)``,
    if given, observes the live state after each iteration.

    Returns the final estimate (not post-clamped; the report carries the
    worst negativity) together with the SolveReport.
    """
    b2 = as_field(b)
    if np.any(b2 < 0):
        raise DomainError("run_admm: observed image must be nonnegative")
    h, w_dim = b2.shape
    if operators is None:
        operators = ProblemOperators.build(h, w_dim, config.direction())
    bg = as_field(config.gamma, h, w_dim)
    if np.any(bg <= 0):
        raise ValueError("background gamma must be positive elementwise")
    ref2 = as_field(reference) if reference is not None else None

    wr = _spectral_width(w_dim)
    sa = operators.blur.spectrum[:, :wr]
    st = operators.grad.d_theta.spectrum[:, :wr]
    sp = operators.grad.d_perp.spectrum[:, :wr]
    sa_conj, ct, cp = np.conj(sa), np.conj(st), np.conj(sp)
    factors = precompute_factors(operators.blur, operators.grad.d_theta,
                                 operators.grad.d_perp).sliced(wr)

    lam, rho = config.lam, config.rho
    c2, c3 = config.alpha0 / rho, config.alpha1 / rho
    shape = b2.shape

    # data-term pieces that never change during the solve
    pos = b2 > 0
    b_pos = b2[pos]
    sum_b = float(b2.sum())
    b_log_b = float(np.sum(b_pos * np.log(b_pos))) if b_pos.size else 0.0

    def kl_at(intensities):
        # sum(b log(b/v)) + sum(v) - sum(b) with the zero-count convention
        return (b_log_b - float(b_pos @ np.log(intensities[pos]))
                + float(intensities.sum()) - sum_b)

    # u0 = observed image, w0 = its directional gradient, z0 = mu0 = 0;
    # the first x-solve happens at the end of the first sweep (shifted order).
    # w is carried in the frequency domain only; its spatial form is never
    # needed unless a callback asks for the full state.
    u = b2.copy()
    uhat = sfft.rfft2(u)
    w1hat, w2hat = st * uhat, sp * uhat
    z = np.zeros((8, h, w_dim))
    mu = np.zeros((8, h, w_dim))
    hx = np.empty((8, h, w_dim))
    scratch = np.empty((8, h, w_dim))  # holds v_z, then the gap, then v_x

    report = SolveReport(rmse_history=[] if ref2 is not None else None)
    t_start = time.perf_counter()
    stop_reason = "max_iterations"

    def fill_hx():
        # consensus blocks (A u, grad u - w, sym w, u) from cached spectra
        hx[0] = _irfft2(sa * uhat, shape)
        hx[1] = _irfft2(st * uhat - w1hat, shape)
        hx[2] = _irfft2(sp * uhat - w2hat, shape)
        hx[3] = _irfft2(st * w1hat, shape)
        hx[4] = _irfft2(0.5 * (sp * w1hat + st * w2hat), shape)
        hx[5] = hx[4]
        hx[6] = _irfft2(sp * w2hat, shape)
        hx[7] = u

    def objective_at_incoming():
        # guard the log domain by falling back to the consensus copy z1
        fid_arg = hx[0] + bg
        guarded = bool(fid_arg.min() <= 0.0)
        if guarded:
            fid_arg = z[0] + bg
        reg1 = float(np.sqrt(np.einsum("ijk,ijk->jk", hx[1:3], hx[1:3])).sum())
        reg2 = float(np.sqrt(np.einsum("ijk,ijk->jk", hx[3:7], hx[3:7])).sum())
        return (lam * kl_at(fid_arg) + config.alpha0 * reg1
                + config.alpha1 * reg2), guarded

    for k in range(1, config.k_max + 1):
        t0 = time.perf_counter()
        fill_hx()
        obj, guarded = objective_at_incoming()

        np.add(hx, mu, out=scratch)  # v_z
        z[0] = prox_kl(scratch[0], b2, bg, lam, rho)
        z[1:3] = prox_group_stack(scratch[1:3], c2)
        z[3:7] = prox_group_stack(scratch[3:7], c3)
        np.maximum(scratch[7], 0.0, out=z[7])

        np.subtract(hx, z, out=scratch)  # constraint gap = mu increment
        resid = math.sqrt(float(np.einsum("ijk,ijk->", scratch, scratch)))
        mu += scratch

        np.subtract(z, mu, out=scratch)  # v_x
        y1, y2, y3 = _solve_x_spectra(
            factors, sa_conj, ct, cp,
            sfft.rfft2(scratch[0]),
            sfft.rfft2(scratch[1]), sfft.rfft2(scratch[2]),
            sfft.rfft2(scratch[3]), sfft.rfft2(scratch[4]),
            sfft.rfft2(scratch[6]),
            sfft.rfft2(scratch[7]))
        u_new = _irfft2(y1, shape)
        _check_finite(k, u_new, z[0])

        u_norm = float(np.linalg.norm(u))
        delta = float(np.linalg.norm(u_new - u))
        rel = delta / u_norm if u_norm > 0 else (math.inf if delta > 0 else 0.0)

        u = u_new
        uhat, w1hat, w2hat = y1, y2, y3

        report.objective.append(obj)
        report.primal_residual.append(resid)
        report.relative_change.append(rel)
        report.seconds.append(time.perf_counter() - t0)
        report.kl_guarded.append(guarded)
        if ref2 is not None:
            report.rmse_history.append(
                float(np.sqrt(np.mean((u - ref2) ** 2))))
        if callback is not None:
            w_spatial = np.stack([_irfft2(w1hat, shape),
                                  _irfft2(w2hat, shape)])
            _check_finite(k, w_spatial)
            callback(k, u, w_spatial,
                     BlockVector(z[0], z[1:3], z[3:7], z[7]),
                     BlockVector(mu[0], mu[1:3], mu[3:7], mu[7]))
        if rel < config.tol:
            stop_reason = "tolerance"
            report.iterations = k
            break
        report.iterations = k

    report.stop_reason = stop_reason
    report.total_seconds = time.perf_counter() - t_start

    # final diagnostics at the returned iterate
    fill_hx()
    report.final_objective, _ = objective_at_incoming()
    np.subtract(hx, z, out=scratch)
    report.final_residual = math.sqrt(
        float(np.einsum("ijk,ijk->", scratch, scratch)))
    denom = max(float(np.linalg.norm(hx.ravel())),
                float(np.linalg.norm(z.ravel())), 1e-300)
    report.final_residual_normalized = report.final_residual / denom
    report.max_negativity = float(max(0.0, -u.min()))
    return ImageGrid.from_matrix(u), report
