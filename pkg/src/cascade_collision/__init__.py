"""Collision-model simulation of cascade quantum master equations.

Carriers S_0 … S_{M-1} meet a stream of fresh sub-environments in order; in
the limit dt → 0 with g²dt = γ fixed the carrier dynamics obey a Lindblad
equation with unidirectional cross terms.  This package simulates both sides
and checks them against each other.
"""

from .collision import ColumnStepper, DiscreteState, apply_column_step, frame_transform, simulate_discrete
from .errors import (
    CascadeError,
    DimensionError,
    ModelValidationError,
    NotHermitianError,
    NotUnitaryError,
    StabilityViolated,
    StepIndexError,
    UnsupportedFrameError,
)
from .generator import (
    CascadeGenerator,
    apply_cascade_generator,
    apply_cross_term,
    apply_local_lindblad,
    build_bundle,
    check_stability,
    compute_delta,
    compute_gamma_cross,
    compute_gamma_local,
    diagonalize_rates,
    enforce_stability,
)
from .integrator import Trajectory, evolve_me, rk4_step
from .io import load_document, model_from_document, model_to_document
from .model import CascadeModel, CouplingTerm, DamperMap, DiscreteSpec, GeneratorBundle, TimedOperator, validate_model
from .presets import preset
from .verify import (
    VerificationReport,
    causality_check,
    convergence_study,
    expansion_residual_check,
    invariant_monitor,
    q_term_check,
)
