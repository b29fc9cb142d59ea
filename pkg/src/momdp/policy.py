"""Executable policies extracted from a synthesized stage stack."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import HorizonError, ModelError
from .exact import DEFAULT_TIE_TOL, TO, GammaStack, lexicographic_value
from .model import MomdpModel
from .pointbased import action_value_vectors, choose_action, _select_pair_index

LOOKAHEAD = "lookahead"
STORED = "stored"


@dataclass(eq=False)
class PolicyHandle:
    """A stage stack bound to its model, ready to answer action queries.

    ``mode`` selects how actions are produced: ``lookahead`` (the default)
    re-runs the one-step backup at the queried point against the next
    stage's sets; ``stored`` replays the action tag of the preferred pair at
    the current stage. The tie tolerance should match the one used during
    synthesis so the policy sees the same admissible sets the solver saw.
    Queries are pure functions of (stack, k, s, b); a small memo table keyed
    on the exact query bytes only caches them.
    """

    model: MomdpModel
    stack: GammaStack
    variant: str | None = None
    tie_tol: float = DEFAULT_TIE_TOL
    mode: str = LOOKAHEAD
    _memo: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.variant is None:
            self.variant = self.stack.variant
        if self.mode not in (LOOKAHEAD, STORED):
            raise ModelError(f"unknown policy mode {self.mode!r}")
        if self.stack.horizon != self.model.horizon:
            raise ModelError(
                f"stack covers {self.stack.horizon} stages, model declares "
                f"{self.model.horizon}"
            )


def select_action(policy: PolicyHandle, k: int, s: int, b) -> int:
    """Action at stage k, state s, belief b under the policy's variant."""
    if k >= policy.stack.horizon:
        raise HorizonError(
            f"no action at stage {k}: horizon is {policy.stack.horizon}"
        )
    b = np.ascontiguousarray(b, dtype=float)
    key = (k, s, b.tobytes())
    hit = policy._memo.get(key)
    if hit is not None:
        return hit
    if policy.mode == STORED:
        ps = policy.stack.pair_set(k, s)
        idx = _select_pair_index(ps, b, policy.variant, policy.tie_tol)
        action = ps.actions[idx]
        if action < 0:
            raise ModelError(f"pair set at stage {k} carries no action tags")
        a = int(action)
    else:
        alpha_a, beta_a = action_value_vectors(
            policy.model, s, b, policy.stack.stages[k + 1],
            policy.variant, policy.tie_tol,
        )
        a = choose_action(alpha_a, beta_a, b, policy.variant, policy.tie_tol)
    policy._memo[key] = a
    return a


def failure_bound(policy: PolicyHandle, s0: int, b0) -> float:
    """Certified upper bound on the closed-loop failure probability.

    Equals one minus the stack's constraint value at stage 0. Only defined
    for the constrained and success-probability variants; the time-only
    variant carries no success semantics.
    """
    if policy.variant == TO:
        raise ModelError("failure_bound is undefined for the time-only variant")
    _, j, _ = lexicographic_value(policy.stack.pair_set(0, s0), np.asarray(b0, float),
                                  policy.tie_tol)
    return 1.0 - j
