"""geopath: piecewise-geodesic path densities and their Wiener-measure limit.

The library computes the density of the piecewise-geodesic volume against
the Riemann-sum volume on constant-curvature manifolds by two independent
determinant routes, evaluates the limiting density (scalar-curvature
exponential times a Fredholm determinant of the min-kernel operator), and
verifies the convergence of one to the other by coupled Monte Carlo.
"""

from ._kernels import BACKEND
from .density import (
    BlockMatrix,
    DensityBreakdown,
    build_F,
    build_Q,
    density_breakdown_for_driver,
    det_expansion,
    factorize,
    matrix_inequalities,
    rho_via_F,
    rho_via_Q,
    ui_bound,
)
from .development import (
    DevelopedPath,
    DrivingPath,
    PartitionGrid,
    antidevelop,
    coarsen,
    develop,
    sample_brownian,
    segment_guard,
)
from .experiments import ExperimentConfig, run_convergence, run_ui_diagnostic, run_verify
from .geometry import (
    CurvatureInFrame,
    FramePoint,
    ManifoldSpec,
    curvature_bound_check,
    curvature_in_frame,
    gamma_operator,
    scalar_curvature,
    sectional_curvature,
    tidal_operator,
)
from .jacobi import JacobiPair, SegmentOperator, estimate_suite, g_fn, h_fn, psi, solve_segment, u_fn
from .wiener import (
    KernelDiscretization,
    LimitDensityResult,
    fredholm_nystrom,
    fredholm_series,
    gamma_k_discrete,
    limit_density,
    limit_density_constant,
    min_kernel_psd_check,
    scal_integral,
)

__version__ = "0.1.0"
__all__ = [name for name in dir() if not name.startswith("_")]
