"""Measure contraction on Sasakian model spaces."""

from .comparison import (
    ComparisonMatrixSpec,
    ComparisonParams,
    d_param,
    density_factor,
    lambda_closed_form,
    m1,
    m2,
    trace_bound_b,
    trace_bound_c,
    trace_bound_last,
)
from .errors import (
    BeyondFirstZeroWarning,
    BlowUpError,
    DomainError,
    PoleError,
    SasakianMCPError,
)
from .riccati import (
    CurvatureMatrix,
    CurvatureProfile,
    build_structure_matrices,
    detect_conjugate_time,
    solve_frame_forward,
    solve_riccati_terminal,
    verify_trace_comparison,
    volume_distortion,
)

__version__ = "0.1.0"
