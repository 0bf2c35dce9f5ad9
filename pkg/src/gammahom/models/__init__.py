from .base import (
    CoefficientFamily,
    Lagrangian,
    QuadraticForm,
    derivative_check,
    finite_difference_derivatives,
    oscillating,
    shifted_x,
)
from .builtin import (
    BUILTIN_MODELS,
    checkerboard,
    get_model,
    layered_1d,
    load_quadratic_form,
    make_counterexample_finsler,
    make_swap_anisotropic,
    nonuap_indicator,
    parse_matrix_literal,
    riemannian_iso,
    squared_norm,
)
from .bump import PROBE_D, BumpH, build_bump_H
from .cartan import (
    CartanIntegrand,
    Cutoff,
    DominanceFunction,
    cartan_noneven,
    cartan_norm,
    check_dominance,
    constant_one,
    dominance_lagrangian,
    half_norm_dominance,
    make_dominance_g,
    noneven_dominance,
    smoothstep_cubic,
    smoothstep_quintic,
    tau,
)

__all__ = [name for name in dir() if not name.startswith("_")]
