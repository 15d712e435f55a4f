"""Hidden Markov model likelihood laboratory.

Thin Python surface over the C++ core: model factories, simulation, exact and
improper likelihood evaluators, the approximate MLE, and the regeneration /
separation experiment primitives.
"""

from hmmlab._core import (  # noqa: F401
    LabError,
    Model,
    MleResult,
    RngStream,
    InitialMeasure,
    approx_mle,
    check_assumptions,
    counting_p_lambda,
    ergodic_decomposition,
    exact_minorization,
    forward_loglik,
    improper_forward_loglik,
    improper_law_weight,
    improper_loglik,
    init_gaussian,
    init_point_mass,
    init_point_mass_vec,
    init_stationary,
    init_weights,
    joint_density_oracle,
    jsr_upper_bound,
    kalman_loglik,
    kl_lower_bound,
    linear_gaussian,
    log_g,
    log_q,
    loglik,
    orbit_distance,
    quadrature_loglik,
    remark13,
    remark13_limit,
    scalar_linear_gaussian,
    simulate,
    stochastic_volatility,
    structural,
    sv_identities,
    sv_log_g,
    two_state_gaussian,
    validate_config,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
