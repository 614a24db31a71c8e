"""Restoration of directional images corrupted by blur and Poisson noise.

The package combines a Kullback-Leibler data-fidelity term with a two-level
directional regularizer, minimized by an ADMM scheme whose subproblems are
all solved exactly (the coupled least-squares step in the frequency domain,
the rest pointwise).  It also ships the texture-direction estimator, the
degradation protocol used to build test problems, quality metrics, and a
batch CLI (``dtgv``).
"""

from .degradation import (DegradationConfig, PsfKernel, degrade, gaussian_psf,
                          make_stripe_phantom, out_of_focus_psf)
from .direction import (DirectionEstimate, EdgeImage, HoughAccumulator,
                        angle_scores, apply_disk_mask, estimate_direction,
                        eta_to_theta, hough_transform, otsu_threshold,
                        sobel_edges)
from .errors import (DegradationError, DivergenceError, DomainError,
                     DtgvError, GridShapeError, NoDirectionError,
                     SingularFactorError, SpectrumError)
from .grids import ImageGrid, StackedField2, StackedField4
from .metrics import QualityRecord, evaluate, isnr, mssim, rmse
from .operators import (BccbOperator, DirectionalOperators, DirectionalSpec,
                        apply_grad, apply_grad_adjoint, apply_sym_derivative,
                        apply_sym_derivative_adjoint, identity_operator,
                        make_blur_operator, make_directional_operators,
                        make_directional_spectra, make_forward_diff_spectra,
                        norm21_2, norm21_4)
from .solver import (BlockVector, ProblemOperators, SolveReport, SolverConfig,
                     SpectralFactors, apply_constraint_operator, kl_divergence,
                     multiplier_update, objective, precompute_factors,
                     project_nonneg, prox_group2, prox_group4, prox_kl,
                     run_admm, solve_x_subproblem, tgv_config)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
