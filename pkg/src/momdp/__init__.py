"""Policy synthesis and evaluation for mixed observable MDPs.

The package solves finite-horizon reach-avoid tasks where part of the state
is hidden behind noisy observations: it computes policies that maximize the
probability of reaching a target set and, among those, minimize the
expected time to get there. An exact support-pair recursion is available
for small models; the point-based approximation scales further and its
success-probability estimate is a certified lower bound.
"""

from .errors import (
    HorizonError,
    ImpossibleEventError,
    IntractableError,
    ModelError,
)
from .model import (
    MixedState,
    MomdpModel,
    Violation,
    as_belief,
    belief_update,
    delta_belief,
    joint_likelihood,
    kernel_f,
    posterior_table,
    uniform_belief,
    validate_model,
)
from .exact import (
    DEFAULT_TIE_TOL,
    EXACT,
    POINT_BASED,
    TO,
    TOQ,
    Q,
    VARIANTS,
    GammaStack,
    OracleResult,
    PairSet,
    SupportPair,
    beta_envelope,
    brute_force_oracle,
    exact_backup,
    exact_synth,
    initialize_terminal,
    lexicographic_value,
    prune_dominated,
    quantitative_backup,
    quantitative_synth,
    quantitative_terminal,
)
from .pointbased import (
    BeliefPointSet,
    active_pair,
    action_value_vectors,
    approx_values,
    choose_action,
    generate_belief_points,
    pb_backup,
    synth,
    value_sweep,
)
from .policy import (
    LOOKAHEAD,
    STORED,
    PolicyHandle,
    failure_bound,
    select_action,
)
from .gridworld import (
    ACTION_DELTAS,
    ACTION_NAMES,
    ADJACENCY,
    DECAY,
    EAST,
    NORTH,
    SOUTH,
    WEST,
    CompiledGrid,
    FactorInfo,
    GoalRegion,
    GridSpec,
    UncertainRegion,
    adjacency_accuracy,
    adjacency_observation,
    compile_grid,
    decay_observation_goal,
    decay_observation_region,
    initial_belief_for,
    parse_ascii_grid,
    sample_environment,
    validate_spec,
)
from .simulate import (
    FAILURE_COLLISION,
    FAILURE_TIMEOUT,
    FIXED,
    PRIOR,
    SUCCESS,
    CompareResult,
    RolloutRecord,
    RolloutStep,
    RunMetrics,
    compare,
    monte_carlo,
    rollout,
    run_rollouts,
    summarize,
)
from . import fileio, worlds

__version__ = "0.1.0"
