"""Numerical laboratory for sign-based optimizers under relaxed smoothness.

The package bundles: the generalized sign method and its competitors
(optimizers), separable test problems and the 1-d hard constructions
(problems), trajectory-based (L0, L1) estimation (smoothness), the
hyperparameter schedule with its derived constants and certificates
(theory), and a deterministic experiment harness with a CLI (harness, cli).
"""

from .core import (
    EmptyVector,
    LengthMismatch,
    NonFinite,
    OptLabError,
    Rng,
    check_same_length,
    norm,
    param_vector,
)
from .harness import (
    BadAxis,
    ConflictingFields,
    ExperimentConfig,
    MissingField,
    ParseError,
    SummaryRecord,
    build_problem,
    parse_config,
    resolve_output_dir,
    run_experiment,
    run_invariant_suite,
    run_sweep,
)
from .optimizers import (
    METHODS,
    HyperParams,
    MissingClipGamma,
    NonFiniteIterate,
    OptimizerState,
    Trajectory,
    TrajectoryRecord,
    apply_step,
    init_state,
    run_optimizer,
    step_adam,
    step_generalized_signsgd,
    step_sgd_family,
)
from .problems import (
    LowerBoundSpec,
    NoiseSpec,
    NonPositiveCurvature,
    Problem,
    SmoothnessSpec,
    SpecViolation,
    finite_difference_gradient,
    make_exp_separable,
    make_lower_bound_case1,
    make_lower_bound_case2,
    make_quadratic,
    sample_stochastic_gradient,
)
from .smoothness import (
    DEFAULT_LOCATIONS,
    DegenerateDesign,
    L0L1Fit,
    NoCoordinateMoved,
    SmoothnessSample,
    ZeroDisplacement,
    estimate_coordinate_smoothness,
    estimate_global_smoothness,
    fit_l0l1,
)
from .theory import (
    DescentReport,
    DivergenceReport,
    InvalidBeta2,
    InvalidRegime,
    NoSecondDerivative,
    RadiusExceeded,
    TheoryConstants,
    TheorySchedule,
    WrongMethod,
    check_descent_lemma,
    check_gd_divergence,
    check_second_order,
    check_update_bound,
    compute_theory_constants,
    gd_lower_bound_iterations,
    momentum_gap,
    theoretical_hyperparams,
)

__version__ = "0.1.0"
