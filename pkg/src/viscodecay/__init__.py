"""Desk-scale lab for a viscoelastic wave equation with variable-exponent
damping and source: simulation, potential-well constants, decay envelopes,
and blow-up condition checks."""

from .analysis import (
    DecayEnvelope,
    KResult,
    StableSetConstants,
    build_envelope,
    check_blowup_conditions,
    check_decay_conditions,
    check_invariant_set,
    compute_Ctilde,
    compute_K,
    compute_K_alpha_sigma,
    derive_constants,
    envelope,
    f_lambda,
    fit_decay,
    komornik_check,
    solve_lambda2,
    verify_envelope,
)
from .domain import (
    DomainSpec,
    embedding_constant,
    first_eigenvalue,
    first_eigenmode,
    grad_sq_norm,
    laplacian,
)
from .energy import EnergyRecord, dissipation_rate, energy_identity_residual, total_energy
from .kernels import (
    ExponentialKernel,
    PowerLawKernel,
    SampledKernel,
    TypeIClass,
    TypeIIClass,
    XiFunction,
    ZeroKernel,
    admissibility,
    blowup_mass_bound,
    decay_class_check,
    eval_g,
    kernel_mass,
)
from .runspec import RunSpec, SpecValidationError, parse_spec
from .solver import (
    BlowUpSignal,
    History,
    SimConfig,
    SimState,
    Trajectory,
    damping_solve,
    initial_state,
    memory_term,
    run,
    step,
)
from .varexp import (
    ExponentField,
    check_modular_norm_bounds,
    exponent_profile,
    log_holder_check,
    luxemburg_norm,
    modular,
    validate_exponent_bounds,
)

__version__ = "0.1.0"
