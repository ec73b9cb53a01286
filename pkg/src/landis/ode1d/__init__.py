"""One-dimensional solves, comparison functions and decay checks."""
from .comparison import CauchyW, ComparisonV, cauchy_w, comparison_v, max_ratio_at_endpoints
from .trajectory import (
    Trajectory,
    extremal_residual,
    extremal_rhs,
    solve_extremal,
    solve_linear_ivp,
)
from .verify import (
    BounceWitness,
    DenseGapResult,
    Envelope,
    UCIReport,
    bounce_search,
    dense_gap_scan,
    detect_bounce,
    envelope,
    verify_uci,
)

__all__ = [
    "Trajectory", "solve_linear_ivp", "solve_extremal", "extremal_rhs", "extremal_residual",
    "ComparisonV", "comparison_v", "CauchyW", "cauchy_w", "max_ratio_at_endpoints",
    "BounceWitness", "detect_bounce", "bounce_search", "Envelope", "envelope",
    "UCIReport", "verify_uci", "DenseGapResult", "dense_gap_scan",
]
