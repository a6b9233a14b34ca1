"""Tracking eigendecompositions of complex 2-parameter matrix functions along
loops, measuring eigenvalue monodromy and eigenvector phase accrual, and
localizing generic cuspidal (exceptional) points."""

from .cusp import (
    GcpCandidate,
    LocalizeOptions,
    LocalizeResult,
    Rect,
    ShrinkScan,
    ShrinkScanOptions,
    discriminant,
    F_and_DF,
    localize,
    newton_refine,
    shrink_scan,
)
from .errors import (
    AmbiguousPatternError,
    CollisionError,
    ConstantLoopError,
    CuspTrackError,
    DegenerateSpectrumError,
    EvalError,
    GaugeDriftError,
    NoConvergenceError,
    ParseError,
    SingularMatrixError,
)
from .expr import evaluate as eval_expr
from .expr import parse as parse_expr
from .expr import to_source
from .flow import (
    EigenPath,
    FlowOptions,
    Monodromy,
    MonodromyOptions,
    coupling_matrix,
    integrate_loop,
    monodromy,
    monodromy_at,
    phase_by_quadrature,
    reversibility_check,
)
from .linalg import EigenDecomposition, eig_small, invert, multiply
from .loops import (
    Circle,
    Ellipse,
    FoldedSegment,
    LoopSpec,
    PhiWarp,
    ReparametrizedLoop,
    Segment,
    ShrunkLoop,
    SmoothedPolygon,
    check_injective,
    reparametrize_min_period,
    rounded_rectangle,
    shrink,
)
from .model import (
    BUILTIN_MODELS,
    ParamMatrixFn,
    block_diag,
    block_n4_model,
    block_n5_model,
    constant_model,
    derivative_along,
    evaluate,
    evaluate_grid,
    from_expressions,
    phase_pi_gcp_locations,
    phase_pi_model,
    phase_zero_model,
    sqrt_model,
    tilted_model,
)

__version__ = "0.1.0"
