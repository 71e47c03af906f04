"""Online control of population dynamics on the probability simplex."""

from .simplex import (
    TOL,
    ControlSet,
    SimplexViolation,
    Violation,
    l1_norm,
    one_one_norm,
    renormalize,
    sub_entropy,
    sub_entropy_grad,
    uniform_dist,
    validate,
)
from .mixing import (
    InfiniteMixing,
    MixingProfile,
    NoUniqueStationary,
    closed_loop,
    dbar,
    dist_to_stationarity,
    mixing_profile,
    mixing_time,
    stationary_distribution,
    tau_mixes,
)
from .dynamics import (
    ConstantController,
    GeneralSystem,
    InfeasibleControl,
    InvalidObservation,
    LinearPolicyController,
    NegativeAddition,
    SimplexLDS,
    Trajectory,
    ingest_counts,
    recover_perturbation,
    regret,
    rollout,
    rollout_linear_policy,
    step,
    step_general,
)
from .optimizer import (
    DacDomain,
    DacParams,
    ExpWeights,
    GradAccumulator,
    LazyMirrorDescent,
    ScaleNotFixed,
    exp_weights_update,
    ftrl_argmin,
    ftrl_objective,
    max_entropy_point,
    regularizer,
)
from .controller import (
    FixedDacController,
    GpcDiagnostics,
    GpcSimplex,
    LambdaWeights,
    choose_a0,
    compute_lambdas,
    counterfactual_closed_form,
    counterfactual_rollout,
    dac_control,
    eta_experiment,
    eta_theory,
    horizon_memory,
    proxy_loss,
    proxy_loss_gradient,
    proxy_loss_gradient_exact,
    run_gpc,
)
from .seeding import rng_for

__version__ = "0.1.0"
