"""MOMDP data model, stochasticity validation, and the belief filter.

The model factors the state into a fully observable part ``s`` and a
partially observable part ``e``. Probability tables are dense numpy arrays
indexed exactly as documented on :class:`MomdpModel`; all indices are
0-based, including in the file format (see :mod:`momdp.fileio`).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ImpossibleEventError, ModelError

# Absolute per-row tolerance used by validation and belief checks.
STOCHASTIC_TOL = 1e-12


class MixedState(NamedTuple):
    """Joint state: observable index ``s`` and hidden index ``e``."""

    s: int
    e: int


def as_belief(values, num_e: int | None = None) -> np.ndarray:
    """Coerce ``values`` to a validated belief vector (copies its input).

    Raises ModelError if the entries are not a probability distribution
    within STOCHASTIC_TOL.
    """
    b = np.array(values, dtype=float)
    if b.ndim != 1:
        raise ModelError(f"belief must be a vector, got shape {b.shape}")
    if num_e is not None and b.shape[0] != num_e:
        raise ModelError(f"belief has length {b.shape[0]}, expected {num_e}")
    if b.size == 0:
        raise ModelError("belief must be nonempty")
    if float(b.min()) < -STOCHASTIC_TOL or float(b.max()) > 1.0 + STOCHASTIC_TOL:
        raise ModelError("belief entries must lie in [0, 1]")
    if abs(float(b.sum()) - 1.0) > STOCHASTIC_TOL:
        raise ModelError(f"belief sums to {b.sum()!r}, expected 1")
    return b


def uniform_belief(num_e: int) -> np.ndarray:
    return np.full(num_e, 1.0 / num_e)


def delta_belief(num_e: int, e: int) -> np.ndarray:
    b = np.zeros(num_e)
    b[e] = 1.0
    return b


@dataclass(frozen=True, eq=False, repr=False)
class MomdpModel:
    """Tabular mixed observable MDP with a reachability target set.

    Table shapes and index order:

    * ``t_s``  (S, E, A, S):       P(s' | s, e, a)
    * ``t_e``  (S, E, A, S, E):    P(e' | s, e, a, s')
    * ``obs``  (S, E, A, Z):       P(z | s', e', a), conditioned on the state
      after the transition and the action that produced it.

    ``target`` is a set of observable-state indices and ``horizon`` the
    number of decision steps. Instances are immutable after construction;
    the arrays are marked read-only so they can be shared across threads.
    """

    num_s: int
    num_e: int
    num_a: int
    num_z: int
    t_s: np.ndarray
    t_e: np.ndarray
    obs: np.ndarray
    target: frozenset[int]
    horizon: int

    def __post_init__(self):
        if min(self.num_s, self.num_e, self.num_a, self.num_z) < 1:
            raise ModelError("all dimensions must be at least 1")
        if self.horizon < 0:
            raise ModelError("horizon must be nonnegative")
        for name in ("t_s", "t_e", "obs"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        shapes = {
            "t_s": (self.num_s, self.num_e, self.num_a, self.num_s),
            "t_e": (self.num_s, self.num_e, self.num_a, self.num_s, self.num_e),
            "obs": (self.num_s, self.num_e, self.num_a, self.num_z),
        }
        for name, want in shapes.items():
            got = getattr(self, name).shape
            if got != want:
                raise ModelError(f"{name} has shape {got}, expected {want}")
        object.__setattr__(self, "target", frozenset(int(s) for s in self.target))
        if not self.target:
            raise ModelError("target set must be nonempty")
        if not all(0 <= s < self.num_s for s in self.target):
            raise ModelError("target indices out of range")

    @functools.cached_property
    def target_vec(self) -> np.ndarray:
        v = np.zeros(self.num_s, dtype=bool)
        v[sorted(self.target)] = True
        v.flags.writeable = False
        return v

    def in_target(self, s: int) -> bool:
        return bool(self.target_vec[s])

    def __repr__(self):
        return (
            f"MomdpModel(num_s={self.num_s}, num_e={self.num_e}, "
            f"num_a={self.num_a}, num_z={self.num_z}, "
            f"target={sorted(self.target)}, horizon={self.horizon})"
        )


@dataclass(frozen=True)
class Violation:
    """One stochasticity violation: the offending row or entry and residual."""

    table: str
    index: tuple[int, ...]
    residual: float

    def __str__(self):
        return f"{self.table}{list(self.index)}: residual {self.residual:.3e}"


def validate_model(model: MomdpModel, tol: float = STOCHASTIC_TOL) -> list[Violation]:
    """Check every probability row of the model; return all violations.

    Structural problems (shape or dimension mismatch) raise ModelError at
    model construction and are distinct from the row-sum violations reported
    here. An empty list means the model is stochastically consistent.
    Intended to run once at load time, not per query.
    """
    out: list[Violation] = []

    def check_rows(name, arr):
        sums = arr.sum(axis=-1)
        for idx in np.argwhere(np.abs(sums - 1.0) > tol):
            key = tuple(int(i) for i in idx)
            out.append(Violation(name, key, float(1.0 - sums[key])))

    def check_range(name, arr):
        low = np.argwhere(arr < -tol)
        high = np.argwhere(arr > 1.0 + tol)
        for idx in low:
            key = tuple(int(i) for i in idx)
            out.append(Violation(name, key, float(arr[key])))
        for idx in high:
            key = tuple(int(i) for i in idx)
            out.append(Violation(name, key, float(arr[key] - 1.0)))

    check_range("t_s", model.t_s)
    check_range("t_e", model.t_e)
    check_range("obs", model.obs)
    check_rows("t_s", model.t_s)
    check_rows("t_e", model.t_e)
    check_rows("obs", model.obs)
    return out


def _check_index(name: str, value: int, bound: int):
    if not 0 <= value < bound:
        raise IndexError(f"{name}={value} out of range [0, {bound})")


def kernel_f(model: MomdpModel, s, e, a, s_next, e_next, z) -> float:
    """Joint one-step probability of (s', e', z) from (s, e) under action a.

    The product t_s(s,e,a,s') * t_e(s,e,a,s',e') * obs(s',e',a,z); summing it
    over (s', e', z) gives 1 for every (s, e, a) on a validated model.
    """
    _check_index("s", s, model.num_s)
    _check_index("e", e, model.num_e)
    _check_index("a", a, model.num_a)
    _check_index("s_next", s_next, model.num_s)
    _check_index("e_next", e_next, model.num_e)
    _check_index("z", z, model.num_z)
    return float(
        model.t_s[s, e, a, s_next]
        * model.t_e[s, e, a, s_next, e_next]
        * model.obs[s_next, e_next, a, z]
    )


def predicted_joint(model: MomdpModel, s, b, a) -> np.ndarray:
    """Pre-observation joint over (s', e'): sum_e b(e) t_s(...) t_e(...)."""
    return np.einsum(
        "e,ep,epq->pq", b, model.t_s[s, :, a, :], model.t_e[s, :, a, :, :]
    )


def posterior_table(model: MomdpModel, s, b, a):
    """All belief-update numerators and likelihoods for one (s, b, a).

    Returns ``(numerators, likelihoods)`` with shapes (S, Z, E') and (S, Z):
    ``numerators[s', z]`` is the unnormalized posterior over e' and
    ``likelihoods[s', z]`` equals P(s', z | s, b, a). Dividing a numerator
    row by its likelihood yields the updated belief.
    """
    m = predicted_joint(model, s, b, a)  # (S', E')
    numerators = m[:, None, :] * np.moveaxis(model.obs[:, :, a, :], 1, 2)
    likelihoods = numerators.sum(axis=2)
    return numerators, likelihoods


def joint_likelihood(model: MomdpModel, s, b, a, s_next, z) -> float:
    """P(s', z | s, b, a): the normalization constant of the belief update."""
    _check_index("s", s, model.num_s)
    _check_index("a", a, model.num_a)
    _check_index("s_next", s_next, model.num_s)
    _check_index("z", z, model.num_z)
    m = predicted_joint(model, s, b, a)
    return float(m[s_next] @ model.obs[s_next, :, a, z])


def belief_update(model: MomdpModel, s, b, a, s_next, z) -> np.ndarray:
    """Filter step: posterior over e' after moving to s' and observing z.

    Raises ImpossibleEventError when (s', z) has probability zero under
    (s, b, a); the filter never renormalizes a zero vector.
    """
    _check_index("s", s, model.num_s)
    _check_index("a", a, model.num_a)
    _check_index("s_next", s_next, model.num_s)
    _check_index("z", z, model.num_z)
    m = predicted_joint(model, s, b, a)
    numerator = model.obs[s_next, :, a, z] * m[s_next]
    total = float(numerator.sum())
    if total <= 0.0:
        raise ImpossibleEventError(
            f"update for impossible event: state {s_next}, observation {z} "
            f"has probability 0 given (s={s}, a={a})"
        )
    return numerator / total
