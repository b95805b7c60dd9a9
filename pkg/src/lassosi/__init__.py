"""Selective inference for Lasso-selected features.

The selection event of the observed active set, restricted to the line
spanned by a test statistic, is a finite union of intervals read off the
exact piecewise-linear solution path; the statistic's conditional null law
on that union is a truncated normal, giving exact p-values and intervals.
"""

from ._kernels import BACKEND_NAME as kernel_backend
from .cv import CvConfig, argmin_region, region_with_cv, validation_error_curve
from .errors import (
    BracketFailure,
    DegenerateSupport,
    EmptyRegion,
    LassoSIError,
    NoConvergence,
    NonConvergentQuadrature,
    RankDeficient,
    SelectionMismatch,
    SingularMatrix,
    StalledPath,
    TooManySigns,
    ZeroLambda,
)
from .homotopy import (
    ParamLine,
    PathSegment,
    SolutionPath,
    compute_solution_path,
    compute_step_size,
    segment_coefficients,
)
from .inference import (
    InferenceOptions,
    SelectiveResult,
    TestTarget,
    make_target,
    region_custom_cutoff,
    region_membership,
    region_TN_A,
    region_TN_As,
    run_inference,
    selective_ci,
    selective_p_value,
)
from .lasso import (
    LassoSolution,
    ProblemData,
    least_squares_on,
    solve_elastic_net,
    solve_lasso,
)
from .numerics import (
    IntervalUnion,
    TruncatedNormal,
    solve_spd,
    std_normal_cdf,
    truncnorm_cdf,
)

__version__ = "0.1.0"
