"""Global stability, Hopf boundaries and simulation of delayed reaction cascades."""

from .attractor import (
    BoxSequence,
    CycleMap,
    box_sequence,
    choose_q,
    hes1_cycle_map,
    iterate_map,
    tilde_majorant,
    verify_strong_attractor,
)
from .hill import (
    HillAnalysis,
    HillCase,
    RegionCurve,
    analyze,
    b_bar,
    check_hes1_global,
    cone_slope,
    g_eval,
    region_curve,
    region_threshold,
    x0_root,
)
from .kernels import Dirac, QuadratureRule, Tabulated, Uniform, discretize, support_separated_from_zero
from .model import (
    Affine,
    CascadeSpec,
    Hes1RawParams,
    Hill,
    SteadyState,
    clamp_extend,
    hes1_spec,
    hill_derivatives,
    rescale_hes1,
    steady_state,
)
from .solver import (
    InitialHistory,
    Trajectory,
    check_convergence,
    integrate,
    integrate_batch,
    oscillation_metrics,
    random_history,
)
from .stability import (
    LinearizationData,
    StabilityReport,
    Verdict,
    char_F,
    check_global,
    classify,
    mikhailov_argument,
    omega0,
    tau_critical,
)

__version__ = "0.1.0"

__all__ = [
    "Affine",
    "BoxSequence",
    "CascadeSpec",
    "CycleMap",
    "Dirac",
    "Hes1RawParams",
    "Hill",
    "HillAnalysis",
    "HillCase",
    "InitialHistory",
    "LinearizationData",
    "QuadratureRule",
    "RegionCurve",
    "StabilityReport",
    "SteadyState",
    "Tabulated",
    "Trajectory",
    "Uniform",
    "Verdict",
    "analyze",
    "b_bar",
    "box_sequence",
    "char_F",
    "check_convergence",
    "check_global",
    "check_hes1_global",
    "choose_q",
    "clamp_extend",
    "classify",
    "cone_slope",
    "discretize",
    "g_eval",
    "hes1_cycle_map",
    "hes1_spec",
    "hill_derivatives",
    "integrate",
    "integrate_batch",
    "iterate_map",
    "mikhailov_argument",
    "omega0",
    "oscillation_metrics",
    "random_history",
    "region_curve",
    "region_threshold",
    "rescale_hes1",
    "steady_state",
    "support_separated_from_zero",
    "tau_critical",
    "tilde_majorant",
    "verify_strong_attractor",
    "x0_root",
]
