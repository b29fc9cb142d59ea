"""Closed-loop Monte Carlo evaluation of synthesized policies.

Every random draw comes from numpy SeedSequence streams derived from the
caller's seed, so runs are reproducible digit for digit and competing
policies can be evaluated against identical latent realizations (common
random numbers). Rollouts are independent given their derived seeds;
aggregation uses compensated summation so results do not depend on
evaluation order.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .exact import TOQ, Q, TO
from .model import MomdpModel, belief_update
from .pointbased import BeliefPointSet, generate_belief_points, synth
from .policy import PolicyHandle, failure_bound, select_action

SUCCESS = "success"
FAILURE_COLLISION = "failure_collision"
FAILURE_TIMEOUT = "failure_timeout"

PRIOR = "prior"
FIXED = "fixed"


@dataclass(frozen=True)
class RolloutStep:
    k: int
    s: int
    a: int
    z: int
    belief: np.ndarray


@dataclass(eq=False)
class RolloutRecord:
    """One closed-loop trajectory.

    ``steps[i]`` records stage i: the state and action at stage i and the
    observation and belief that resulted from them. ``out_of_target_steps``
    counts stages spent outside the target set over the whole task window;
    non-success runs always count the full window because the run either
    sits in the absorbing failure state or times out.
    """

    seed: int
    e_true: int
    steps: tuple[RolloutStep, ...]
    outcome: str
    out_of_target_steps: int

    @property
    def succeeded(self) -> bool:
        return self.outcome == SUCCESS


@dataclass(frozen=True)
class RunMetrics:
    """Aggregate Monte Carlo results, one row of a comparison table."""

    expected_time: float
    failure_rate: float
    failure_bound: float | None
    synth_total_time: float | None
    backup_time_ms: float | None
    rollout_count: int
    confidence_halfwidth: float


class BeliefCache:
    """Memo for filter updates keyed on the exact update arguments.

    Trajectories of a deterministic policy revisit the same belief states
    constantly; caching the update makes large rollout batches cheap.
    """

    def __init__(self, model: MomdpModel):
        self.model = model
        self._table: dict = {}

    def update(self, s, b, a, s2, z) -> np.ndarray:
        key = (s, b.tobytes(), a, s2, z)
        hit = self._table.get(key)
        if hit is None:
            hit = belief_update(self.model, s, b, a, s2, z)
            self._table[key] = hit
        return hit


def _draw(rng, probs: np.ndarray) -> int:
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, len(probs) - 1)


def rollout(model: MomdpModel, policy: PolicyHandle, e_true: int, s0: int, b0,
            seed, fail_states=frozenset(), cache: BeliefCache | None = None) -> RolloutRecord:
    """Simulate one episode from (s0, b0) with latent realization e_true.

    Terminates early on entering the target (success) or a failure state
    (collision); otherwise the run times out at the horizon. The belief is
    filtered with the observations actually sampled, so an impossible-event
    filter error here means the simulator and model disagree and is allowed
    to propagate.
    """
    rng = np.random.default_rng(seed)
    if cache is None:
        cache = BeliefCache(model)
    horizon = model.horizon
    b = np.ascontiguousarray(b0, dtype=float)
    s, e = s0, e_true
    steps: list[RolloutStep] = []
    seed_label = seed if isinstance(seed, int) else -1

    if model.in_target(s):
        return RolloutRecord(seed_label, e_true, (), SUCCESS, 0)
    if s in fail_states:
        return RolloutRecord(seed_label, e_true, (), FAILURE_COLLISION, horizon + 1)

    out_steps = 0
    outcome = FAILURE_TIMEOUT
    for k in range(horizon):
        out_steps += 1  # s is outside the target here
        a = select_action(policy, k, s, b)
        s2 = _draw(rng, model.t_s[s, e, a])
        e2 = _draw(rng, model.t_e[s, e, a, s2])
        z = _draw(rng, model.obs[s2, e2, a])
        b = cache.update(s, b, a, s2, z)
        steps.append(RolloutStep(k, s, a, z, b))
        s, e = s2, e2
        if model.in_target(s):
            outcome = SUCCESS
            break
        if s in fail_states:
            outcome = FAILURE_COLLISION
            out_steps = horizon + 1
            break
    else:
        out_steps = horizon + 1  # timed out: the final state is also outside
    return RolloutRecord(seed_label, e_true, tuple(steps), outcome, out_steps)


def run_rollouts(model: MomdpModel, policy: PolicyHandle, n_rollouts: int,
                 seed: int, s0: int, b0, mode: str = PRIOR,
                 e_fixed: int | None = None,
                 fail_states=frozenset()) -> list[RolloutRecord]:
    """Rollout batch with derived seeds; the latent stream is policy-free.

    The latent realizations and the per-rollout dynamics seeds depend only
    on ``seed`` and the rollout index, so evaluating several policies with
    the same seed compares them on identical environments.
    """
    if n_rollouts < 1:
        raise ValueError("need at least one rollout")
    if mode not in (PRIOR, FIXED):
        raise ValueError(f"unknown environment sampling mode {mode!r}")
    if mode == FIXED and e_fixed is None:
        raise ValueError("fixed mode needs an explicit latent realization")
    root = np.random.SeedSequence(seed)
    env_ss, dyn_ss = root.spawn(2)
    env_rng = np.random.default_rng(env_ss)
    b0 = np.asarray(b0, dtype=float)
    if mode == PRIOR:
        # Drawing from the initial belief equals independent per-factor
        # draws for compiled grids, whose belief is the product of priors.
        e_list = [_draw(env_rng, b0) for _ in range(n_rollouts)]
    else:
        e_list = [int(e_fixed)] * n_rollouts
    dyn_seeds = dyn_ss.spawn(n_rollouts)
    cache = BeliefCache(model)
    return [
        rollout(model, policy, e_list[i], s0, b0, dyn_seeds[i], fail_states, cache)
        for i in range(n_rollouts)
    ]


def summarize(records: list[RolloutRecord], bound: float | None,
              synth_total_time: float | None = None,
              backup_time_ms: float | None = None) -> RunMetrics:
    n = len(records)
    failures = [0.0 if r.succeeded else 1.0 for r in records]
    failure_rate = math.fsum(failures) / n
    expected_time = math.fsum(r.out_of_target_steps for r in records) / n
    if n > 1:
        var = math.fsum((f - failure_rate) ** 2 for f in failures) / (n - 1)
        halfwidth = 1.96 * math.sqrt(var / n)
    else:
        halfwidth = 0.0
    return RunMetrics(
        expected_time=expected_time,
        failure_rate=failure_rate,
        failure_bound=bound,
        synth_total_time=synth_total_time,
        backup_time_ms=backup_time_ms,
        rollout_count=n,
        confidence_halfwidth=halfwidth,
    )


def monte_carlo(model: MomdpModel, policy: PolicyHandle, n_rollouts: int,
                seed: int, s0: int, b0, mode: str = PRIOR,
                e_fixed: int | None = None, fail_states=frozenset(),
                synth_total_time: float | None = None,
                backup_time_ms: float | None = None) -> RunMetrics:
    """Aggregate a seeded rollout batch into RunMetrics."""
    records = run_rollouts(model, policy, n_rollouts, seed, s0, b0,
                           mode, e_fixed, fail_states)
    bound = None
    if policy.variant != TO:
        bound = failure_bound(policy, s0, np.asarray(b0, dtype=float))
    return summarize(records, bound, synth_total_time, backup_time_ms)


@dataclass(eq=False)
class CompareResult:
    """Per-variant metrics from a common-random-numbers comparison."""

    metrics: dict[str, RunMetrics]
    points: BeliefPointSet
    records: dict[str, list[RolloutRecord]]


def compare(compiled, n_points: int, n_rollouts: int, seed: int,
            tie_tol: float | None = None) -> CompareResult:
    """Synthesize and evaluate all three variants on one compiled grid.

    All variants share the same belief point set and the same environment
    seed stream, so the i-th rollout of every policy runs against the same
    latent realization.
    """
    from .exact import DEFAULT_TIE_TOL

    tol = DEFAULT_TIE_TOL if tie_tol is None else tie_tol
    model = compiled.model
    points = generate_belief_points(
        model, n_points, seed, compiled.start_state, compiled.initial_belief
    )
    metrics: dict[str, RunMetrics] = {}
    records: dict[str, list[RolloutRecord]] = {}
    n_backups = max(1, model.horizon * model.num_s * len(points))
    for variant in (TO, Q, TOQ):
        t0 = time.perf_counter()
        stack = synth(model, points, variant, tol)
        total = time.perf_counter() - t0
        policy = PolicyHandle(model, stack, tie_tol=tol)
        recs = run_rollouts(
            model, policy, n_rollouts, seed, compiled.start_state,
            compiled.initial_belief, PRIOR, None, compiled.fail_states,
        )
        bound = None
        if variant != TO:
            bound = failure_bound(policy, compiled.start_state, compiled.initial_belief)
        metrics[variant] = summarize(recs, bound, total, 1000.0 * total / n_backups)
        records[variant] = recs
    return CompareResult(metrics, points, records)
