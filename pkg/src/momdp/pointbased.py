"""Point-based approximation of the constrained value function.

Instead of the full cross-sum, one support pair is computed per belief in a
finite point set, for every observable state and stage. Every pair produced
this way is also a member of the exact stage set, so the resulting
success-probability envelope is a certified lower bound of the exact one;
the price is that the approximation only touches value at the chosen
points. Stage-set sizes are bounded by the number of belief points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelError
from .exact import (
    DEFAULT_TIE_TOL,
    POINT_BASED,
    TOQ,
    Q,
    TO,
    VARIANTS,
    GammaStack,
    PairSet,
    SupportPair,
    initialize_terminal,
    lexicographic_value,
)
from .model import MomdpModel, posterior_table

VERTEX = "vertex"
UNIFORM_RANDOM = "uniform"
REACHABLE_ROLLOUT = "reachable"

# Two belief points closer than this in max-norm are considered duplicates.
POINT_DEDUP_TOL = 1e-9


@dataclass(eq=False)
class BeliefPointSet:
    """Ordered belief points with their provenance and generating seed."""

    points: np.ndarray  # (n, E)
    provenance: tuple[str, ...]
    seed: int

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


def generate_belief_points(model: MomdpModel, n: int, seed: int,
                           s0: int = 0, b0=None) -> BeliefPointSet:
    """Deterministically build a belief point set of (up to) ``n`` points.

    The set always starts with the |E| simplex vertices; the remainder is
    split roughly half and half between uniform Dirichlet samples and
    beliefs visited by random-action rollouts of the filter from (s0, b0).
    Points closer than POINT_DEDUP_TOL in max-norm are dropped, keeping the
    earliest occurrence, so fewer than ``n`` points can be returned on
    degenerate models.
    """
    num_e = model.num_e
    if n < num_e:
        raise ValueError(f"need at least |E|={num_e} points, got {n}")
    if b0 is None:
        b0 = np.full(num_e, 1.0 / num_e)
    b0 = np.asarray(b0, dtype=float)
    rng = np.random.default_rng(seed)

    candidates: list[tuple[np.ndarray, str]] = [
        (np.eye(num_e)[i], VERTEX) for i in range(num_e)
    ]
    remainder = n - num_e
    n_uniform = (remainder + 1) // 2
    n_reach = remainder // 2
    for _ in range(n_uniform):
        candidates.append((rng.dirichlet(np.ones(num_e)), UNIFORM_RANDOM))

    # Random-action filter rollouts restarted at the horizon; the walk
    # starts at (s0, b0), so the initial belief is itself a visited point.
    collected = 0
    if n_reach > 0:
        candidates.append((b0.copy(), REACHABLE_ROLLOUT))
        collected = 1
    s, b, step = s0, b0, 0
    budget = 50 * max(1, n_reach)
    while collected < n_reach and budget > 0:
        budget -= 1
        if model.horizon == 0:
            break
        a = int(rng.integers(model.num_a))
        numer, lik = posterior_table(model, s, b, a)
        flat = lik.ravel()
        pick = int(rng.choice(flat.size, p=flat / flat.sum()))
        s2, z = divmod(pick, model.num_z)
        b = numer[s2, z] / lik[s2, z]
        s = s2
        candidates.append((b, REACHABLE_ROLLOUT))
        collected += 1
        step += 1
        if step >= model.horizon:
            s, b, step = s0, b0, 0

    points: list[np.ndarray] = []
    provenance: list[str] = []

    def admit(vec, kind) -> bool:
        for kept in points:
            if np.max(np.abs(kept - vec)) < POINT_DEDUP_TOL:
                return False
        points.append(np.asarray(vec, dtype=float))
        provenance.append(kind)
        return True

    for vec, kind in candidates:
        if len(points) >= n:
            break
        admit(vec, kind)

    # Top up with extra uniform samples when deduplication ran us short.
    attempts = 20 * n
    while len(points) < n and attempts > 0:
        attempts -= 1
        if num_e == 1:
            break
        admit(rng.dirichlet(np.ones(num_e)), UNIFORM_RANDOM)

    return BeliefPointSet(np.array(points), tuple(provenance), seed)


def _select_pair_index(pair_set: PairSet, b, variant: str, tie_tol: float) -> int:
    """Index of the preferred pair at belief b under the variant's rule."""
    if variant == Q:
        return int(np.argmax(pair_set.betas @ b))
    if variant == TO:
        return int(np.argmax(pair_set.alphas @ b))
    jb = pair_set.betas @ b
    admissible = np.flatnonzero(jb >= float(jb.max()) - tie_tol)
    va = pair_set.alphas @ b
    return int(admissible[int(np.argmax(va[admissible]))])


def active_pair(gamma_successor: PairSet, b_next,
                tie_tol: float = DEFAULT_TIE_TOL) -> SupportPair:
    """Lexicographically preferred successor pair at the updated belief."""
    if len(gamma_successor) == 0:
        raise ValueError("active_pair on an empty pair set")
    return gamma_successor[_select_pair_index(gamma_successor, b_next, TOQ, tie_tol)]


def action_value_vectors(model: MomdpModel, s: int, b, gamma_next: list[PairSet],
                         variant: str = TOQ, tie_tol: float = DEFAULT_TIE_TOL):
    """Per-action (alpha, beta) vectors backed up through the active pairs.

    For every reachable (successor state, action, observation) triple the
    preferred successor pair at the filtered belief is selected; triples
    with zero likelihood contribute nothing (their transition weight is zero
    regardless of the pair, so skipping them is value-neutral and avoids a
    division by zero in the filter). Returns arrays of shape (A, E).
    """
    num_e, num_a = model.num_e, model.num_a
    in_t = model.in_target(s)
    base = 1.0 if in_t else 0.0
    gate = 0.0 if in_t else 1.0
    alpha_a = np.zeros((num_a, num_e))
    beta_a = np.zeros((num_a, num_e))
    for a in range(num_a):
        numer, lik = posterior_table(model, s, b, a)  # (S', Z, E'), (S', Z)
        live = np.flatnonzero(lik.sum(axis=1) > 0.0)
        act_alpha = np.zeros((len(live), model.num_z, num_e))
        act_beta = np.zeros((len(live), model.num_z, num_e))
        for row, s2 in enumerate(live):
            for z in range(model.num_z):
                if lik[s2, z] <= 0.0:
                    continue
                b_next = numer[s2, z] / lik[s2, z]
                idx = _select_pair_index(gamma_next[s2], b_next, variant, tie_tol)
                act_alpha[row, z] = gamma_next[s2].alphas[idx]
                act_beta[row, z] = gamma_next[s2].betas[idx]
        ts = model.t_s[s, :, a, :][:, live]          # (E, P)
        te = model.t_e[s, :, a, :, :][:, live, :]    # (E, P, E')
        ob = model.obs[live, :, a, :]                # (P, E', Z)
        xa = np.einsum("pqz,pzq->pq", ob, act_alpha)
        xb = np.einsum("pqz,pzq->pq", ob, act_beta)
        alpha_a[a] = base + np.einsum("ep,epq,pq->e", ts, te, xa)
        beta_a[a] = base + gate * np.einsum("ep,epq,pq->e", ts, te, xb)
    return alpha_a, beta_a


def choose_action(alpha_a: np.ndarray, beta_a: np.ndarray, b,
                  variant: str = TOQ, tie_tol: float = DEFAULT_TIE_TOL) -> int:
    """Action selection rule shared by the backup and the deployed policy."""
    if variant == Q:
        return int(np.argmax(beta_a @ b))
    if variant == TO:
        return int(np.argmax(alpha_a @ b))
    jb = beta_a @ b
    admissible = np.flatnonzero(jb >= float(jb.max()) - tie_tol)
    va = alpha_a @ b
    return int(admissible[int(np.argmax(va[admissible]))])


def pb_backup(model: MomdpModel, s: int, b, gamma_next: list[PairSet],
              gamma_s_k: PairSet, variant: str = TOQ,
              tie_tol: float = DEFAULT_TIE_TOL) -> PairSet:
    """Back up one belief point: append the best action's pair to the set.

    Appends exactly one pair (tagged with its action) unless an identical
    pair produced from another point is already present.
    """
    alpha_a, beta_a = action_value_vectors(model, s, b, gamma_next, variant, tie_tol)
    a_star = choose_action(alpha_a, beta_a, b, variant, tie_tol)
    gamma_s_k.append(alpha_a[a_star], beta_a[a_star], a_star)
    return gamma_s_k


def value_sweep(model: MomdpModel, gamma_next: list[PairSet],
                points: BeliefPointSet, variant: str = TOQ,
                tie_tol: float = DEFAULT_TIE_TOL) -> list[PairSet]:
    """One stage of the point-based recursion over every state and point."""
    out = []
    for s in range(model.num_s):
        gamma_s_k = PairSet(model.num_e)
        for b in points:
            pb_backup(model, s, b, gamma_next, gamma_s_k, variant, tie_tol)
        out.append(gamma_s_k)
    return out


def synth(model: MomdpModel, points: BeliefPointSet, variant: str = TOQ,
          tie_tol: float = DEFAULT_TIE_TOL, progress=None) -> GammaStack:
    """Point-based synthesis of the full stage stack for one variant.

    ``toq`` runs the constrained backup (success probability first, then
    occupancy). ``q`` selects successor pairs and actions by the beta score
    alone; ``to`` by the alpha score alone (plain occupancy maximization).
    ``progress``, when given, is called with the stage index after each
    completed sweep. The result is deterministic down to the bit for fixed
    inputs.
    """
    if variant not in VARIANTS:
        raise ModelError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    if len(points) == 0:
        raise ValueError("belief point set is empty")
    stages: list[list[PairSet] | None] = [None] * (model.horizon + 1)
    stages[model.horizon] = initialize_terminal(model)
    for k in range(model.horizon - 1, -1, -1):
        stages[k] = value_sweep(model, stages[k + 1], points, variant, tie_tol)
        if progress is not None:
            progress(k)
    return GammaStack(stages, POINT_BASED, variant)


def approx_values(stack: GammaStack, k: int, s: int, b,
                  tie_tol: float = DEFAULT_TIE_TOL):
    """(value, constraint value) of the stack at stage k, state s, belief b."""
    v, j, _ = lexicographic_value(stack.pair_set(k, s), b, tie_tol)
    return v, j
