"""Two-peak concentrating solutions of a perturbed critical biharmonic equation."""
from .bubble import Bubble, ConstantK, Dimension, KProfile, PeakAnsatz, SearchBox, TwoPeakK, bubble_residual
from .config import RunConfig, default_config, load_config
from .constants import expansion_model, interaction_constants, structure_constants
from .galerkin import (
    build_space,
    energy_value,
    lagrange_multipliers,
    reduced_gradients,
    solve_correction,
)
from .integrate import QuadratureSpec
from .pipeline import emit_report, positivity_check, run_pipeline
from .reduced import brouwer_degree, g_map, jac_g, l_eps, solve_full_reduced, solve_reduced

__all__ = [
    "Bubble",
    "ConstantK",
    "Dimension",
    "KProfile",
    "PeakAnsatz",
    "QuadratureSpec",
    "RunConfig",
    "SearchBox",
    "TwoPeakK",
    "brouwer_degree",
    "bubble_residual",
    "build_space",
    "default_config",
    "emit_report",
    "energy_value",
    "expansion_model",
    "g_map",
    "interaction_constants",
    "jac_g",
    "l_eps",
    "lagrange_multipliers",
    "load_config",
    "positivity_check",
    "reduced_gradients",
    "run_pipeline",
    "solve_correction",
    "solve_full_reduced",
    "solve_reduced",
    "structure_constants",
]
