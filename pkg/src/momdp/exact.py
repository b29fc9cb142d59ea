"""Exact support-pair dynamic programming for constrained reach synthesis.

The stage value functions are piecewise affine in the belief and are
represented by finite sets of vector pairs per observable state. For a pair
``(alpha, beta)`` and belief ``b``, ``beta @ b`` is the success probability
(reaching the target set within the remaining horizon) of one concrete
branch of a history-feedback policy, and ``alpha @ b`` is the expected
number of stages that branch spends inside the target set. The constrained
value at a belief maximizes ``alpha @ b`` over pairs that maximize
``beta @ b``; because target occupancy counts stages, minimizing expected
time outside the target is the same as maximizing ``alpha @ b``.

The stage update is a cross-sum: for each action, one successor pair is
chosen independently per (successor state, observation) combination and the
contributions are added. This enumerates every deterministic continuation,
so the resulting sets grow multiplicatively; :func:`exact_backup` refuses to
expand beyond a configurable cap and callers are expected to fall back to
the point-based solver (:mod:`momdp.pointbased`) on all but small models.

A note on terminal pair length: pairs are evaluated against beliefs over the
hidden states, so terminal pairs are all-ones / all-zeros vectors of length
|E| (the only dimensionally consistent initialization).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IntractableError
from .model import MomdpModel

# Shared default for "these scores tie" decisions. Cross-sums accumulate on
# the order of |Z||S|*N additions, so exact equality would drop legitimately
# optimal pairs.
DEFAULT_TIE_TOL = 1e-9
DEFAULT_CROSS_SUM_CAP = 10_000_000
DEFAULT_POLICY_CAP = 100_000_000

EXACT = "exact"
POINT_BASED = "point-based"

TOQ = "toq"  # minimize expected time subject to maximal success probability
Q = "q"      # maximize success probability only
TO = "to"    # minimize expected time only
VARIANTS = (TOQ, Q, TO)


@dataclass(frozen=True, eq=False)
class SupportPair:
    """One (alpha, beta) vector pair, optionally tagged with its action."""

    alpha: np.ndarray
    beta: np.ndarray
    action: int | None = None


class PairSet:
    """Ordered collection of support pairs with vectorized storage.

    Insertion order is part of the contract: ties everywhere break toward
    the lowest insertion index, which keeps runs bit-reproducible. Alphas
    and betas are exposed as (n, E) matrices for fast envelope evaluation.
    """

    __slots__ = ("num_e", "alphas", "betas", "actions", "_keys")

    def __init__(self, num_e: int, alphas=None, betas=None, actions=None):
        self.num_e = int(num_e)
        if alphas is None:
            self.alphas = np.empty((0, self.num_e))
            self.betas = np.empty((0, self.num_e))
            self.actions = np.empty(0, dtype=np.int64)
        else:
            self.alphas = np.ascontiguousarray(alphas, dtype=float)
            self.betas = np.ascontiguousarray(betas, dtype=float)
            self.actions = np.asarray(actions, dtype=np.int64)
            if not (len(self.alphas) == len(self.betas) == len(self.actions)):
                raise ValueError("alphas, betas and actions must align")
        self._keys = None  # lazy duplicate index, built on first append

    @classmethod
    def from_pairs(cls, num_e: int, pairs) -> "PairSet":
        ps = cls(num_e)
        for p in pairs:
            ps.append(p.alpha, p.beta, p.action)
        return ps

    def __len__(self):
        return len(self.alphas)

    def __getitem__(self, i: int) -> SupportPair:
        a = int(self.actions[i])
        return SupportPair(self.alphas[i], self.betas[i], None if a < 0 else a)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def _key(self, alpha, beta, action) -> bytes:
        return alpha.tobytes() + beta.tobytes() + int(action).to_bytes(8, "little", signed=True)

    def append(self, alpha, beta, action: int | None = None) -> bool:
        """Append one pair unless an identical one is already present."""
        alpha = np.ascontiguousarray(alpha, dtype=float)
        beta = np.ascontiguousarray(beta, dtype=float)
        act = -1 if action is None else int(action)
        if self._keys is None:
            self._keys = {
                self._key(self.alphas[i], self.betas[i], self.actions[i])
                for i in range(len(self))
            }
        key = self._key(alpha, beta, act)
        if key in self._keys:
            return False
        self._keys.add(key)
        self.alphas = np.vstack([self.alphas, alpha[None, :]])
        self.betas = np.vstack([self.betas, beta[None, :]])
        self.actions = np.append(self.actions, act)
        return True


@dataclass(eq=False)
class GammaStack:
    """Per-stage, per-state support pair sets defining a value function.

    ``stages[k][s]`` is the pair set for observable state ``s`` at stage
    ``k``; index ``horizon`` holds the terminal initialization.
    """

    stages: list[list[PairSet]]
    flavor: str = EXACT
    variant: str = TOQ

    @property
    def horizon(self) -> int:
        return len(self.stages) - 1

    @property
    def num_states(self) -> int:
        return len(self.stages[-1])

    def pair_set(self, k: int, s: int) -> PairSet:
        return self.stages[k][s]


def initialize_terminal(model: MomdpModel) -> list[PairSet]:
    """Terminal pair sets: all-ones on target states, all-zeros elsewhere."""
    ones = np.ones(model.num_e)
    zeros = np.zeros(model.num_e)
    out = []
    for s in range(model.num_s):
        vec = ones if model.in_target(s) else zeros
        out.append(PairSet(model.num_e, vec[None, :], vec[None, :], [-1]))
    return out


def lexicographic_value(pair_set: PairSet, b, tie_tol: float = DEFAULT_TIE_TOL):
    """Constrained value at belief b: max alpha @ b among beta @ b maximizers.

    Returns ``(value, constraint_value, pair)`` where ``constraint_value`` is
    the plain maximum of ``beta @ b``, the admissible set contains every pair
    within ``tie_tol`` of it, and ``pair`` is the achieving pair with the
    lowest insertion index.
    """
    if len(pair_set) == 0:
        raise ValueError("lexicographic_value on an empty pair set")
    jb = pair_set.betas @ b
    j = float(jb.max())
    admissible = np.flatnonzero(jb >= j - tie_tol)
    va = pair_set.alphas @ b
    local = int(np.argmax(va[admissible]))
    idx = int(admissible[local])
    return float(va[idx]), j, pair_set[idx]


def _cross_sum_size(model: MomdpModel, gamma_next, s: int) -> int:
    n = model.num_a
    for s2 in range(model.num_s):
        n *= len(gamma_next[s2]) ** model.num_z
    return n


def exact_backup(model: MomdpModel, gamma_next: list[PairSet],
                 cap: int = DEFAULT_CROSS_SUM_CAP) -> list[PairSet]:
    """One exact stage update; emits the full cross-sum set per state.

    For each state and action, a partial pair is formed per (successor
    state, observation) cell from every successor pair, and the output set
    contains every sum picking one partial per cell, united over actions.
    Successor pairs come from the successor state's set. Cells are ordered
    by successor state then observation, with earlier cells varying slower;
    together with the action-major union this fixes the canonical insertion
    order used for tie-breaking.

    Raises IntractableError when the predicted size of any output set
    exceeds ``cap``; use the point-based solver for such models.
    """
    num_s, num_e, num_a, num_z = model.num_s, model.num_e, model.num_a, model.num_z
    if any(len(g) == 0 for g in gamma_next):
        raise ValueError("every successor pair set must be nonempty")
    out = []
    for s in range(num_s):
        predicted = _cross_sum_size(model, gamma_next, s)
        if predicted > cap:
            raise IntractableError(
                f"exact backup intractable: state {s} would generate "
                f"{predicted} pairs (cap {cap}); use the point-based solver"
            )
        in_t = model.in_target(s)
        base = (1.0 if in_t else 0.0) / (num_z * num_s)
        gate = 0.0 if in_t else 1.0
        alpha_blocks, beta_blocks, action_blocks = [], [], []
        for a in range(num_a):
            comb_a = np.zeros((1, num_e))
            comb_b = np.zeros((1, num_e))
            for s2 in range(num_s):
                w = model.t_s[s, :, a, s2][:, None] * model.t_e[s, :, a, s2, :]
                for z in range(num_z):
                    wz = w * model.obs[s2, :, a, z][None, :]  # (E, E')
                    pa = base + gamma_next[s2].alphas @ wz.T  # (n_i, E)
                    pb = base + gate * (gamma_next[s2].betas @ wz.T)
                    comb_a = (comb_a[:, None, :] + pa[None, :, :]).reshape(-1, num_e)
                    comb_b = (comb_b[:, None, :] + pb[None, :, :]).reshape(-1, num_e)
            alpha_blocks.append(comb_a)
            beta_blocks.append(comb_b)
            action_blocks.append(np.full(len(comb_a), a, dtype=np.int64))
        out.append(PairSet(
            num_e,
            np.concatenate(alpha_blocks),
            np.concatenate(beta_blocks),
            np.concatenate(action_blocks),
        ))
    return out


def _dedup_indices(joint: np.ndarray) -> np.ndarray:
    """Indices of first occurrences of unique rows, in original order."""
    _, first = np.unique(joint, axis=0, return_index=True)
    return np.sort(first)


def _dominated_mask(joint: np.ndarray) -> np.ndarray:
    """Boolean mask of rows pointwise dominated by some other distinct row.

    Rows must already be unique; transitivity makes it safe for a removed
    row to act as the witness for another removal.
    """
    n, width = joint.shape
    dominated = np.zeros(n, dtype=bool)
    block = max(1, 4_000_000 // max(1, n * width))
    for start in range(0, n, block):
        end = min(start + block, n)
        ge = (joint[:, None, :] >= joint[None, start:end, :]).all(axis=2)
        for i in range(end - start):
            ge[start + i, i] = False
        dominated[start:end] = ge.any(axis=0)
    return dominated


def prune_dominated(pair_set: PairSet) -> PairSet:
    """Drop duplicates and pairs jointly dominated in both alpha and beta.

    A pair is removed when another pair is componentwise at least as large
    in alpha and in beta and strictly larger somewhere. Because beliefs are
    nonnegative, removal never changes the lexicographic value at any
    belief. Output preserves the surviving insertion order.
    """
    if len(pair_set) <= 1:
        return pair_set
    joint = np.hstack([pair_set.alphas, pair_set.betas])
    keep_idx = _dedup_indices(joint)
    unique = joint[keep_idx]
    sel = keep_idx[~_dominated_mask(unique)]
    return PairSet(pair_set.num_e, pair_set.alphas[sel],
                   pair_set.betas[sel], pair_set.actions[sel])


def exact_synth(model: MomdpModel, prune: bool = True,
                cap: int = DEFAULT_CROSS_SUM_CAP,
                dominance_limit: int = 4096) -> GammaStack:
    """Run the exact recursion from the terminal stage down to stage 0.

    With ``prune`` enabled, duplicates are always removed between stages and
    dominance pruning runs when a deduplicated set has at most
    ``dominance_limit`` pairs (the pairwise test is quadratic). Pruning only
    shrinks sets in value-preserving ways, so envelopes and lexicographic
    values are unchanged.
    """
    stages: list[list[PairSet] | None] = [None] * (model.horizon + 1)
    stages[model.horizon] = initialize_terminal(model)
    for k in range(model.horizon - 1, -1, -1):
        sets = exact_backup(model, stages[k + 1], cap=cap)
        if prune:
            pruned = []
            for ps in sets:
                joint = np.hstack([ps.alphas, ps.betas])
                keep = _dedup_indices(joint)
                ps = PairSet(ps.num_e, ps.alphas[keep], ps.betas[keep],
                             ps.actions[keep])
                if len(ps) <= dominance_limit:
                    ps = prune_dominated(ps)
                pruned.append(ps)
            sets = pruned
        stages[k] = sets
    return GammaStack(stages, EXACT, TOQ)


# ---------------------------------------------------------------------------
# Success-probability-only recursion (the unconstrained maximization), used
# both as a solver variant and as a consistency check: its upper envelope
# must coincide with the beta envelope of the full constrained recursion.
# ---------------------------------------------------------------------------

def quantitative_terminal(model: MomdpModel) -> list[np.ndarray]:
    """Terminal beta sets: single all-ones row on target states, zeros off."""
    out = []
    for s in range(model.num_s):
        vec = np.ones(model.num_e) if model.in_target(s) else np.zeros(model.num_e)
        out.append(vec[None, :].copy())
    return out


def quantitative_backup(model: MomdpModel, beta_next: list[np.ndarray],
                        cap: int = DEFAULT_CROSS_SUM_CAP) -> list[np.ndarray]:
    """Beta-only cross-sum update; mirrors exact_backup without alphas."""
    num_s, num_e, num_a, num_z = model.num_s, model.num_e, model.num_a, model.num_z
    out = []
    for s in range(num_s):
        predicted = num_a
        for s2 in range(num_s):
            predicted *= len(beta_next[s2]) ** num_z
        if predicted > cap:
            raise IntractableError(
                f"quantitative backup intractable: state {s} would generate "
                f"{predicted} vectors (cap {cap})"
            )
        in_t = model.in_target(s)
        base = (1.0 if in_t else 0.0) / (num_z * num_s)
        gate = 0.0 if in_t else 1.0
        blocks = []
        for a in range(num_a):
            comb = np.zeros((1, num_e))
            for s2 in range(num_s):
                w = model.t_s[s, :, a, s2][:, None] * model.t_e[s, :, a, s2, :]
                for z in range(num_z):
                    wz = w * model.obs[s2, :, a, z][None, :]
                    pb = base + gate * (beta_next[s2] @ wz.T)
                    comb = (comb[:, None, :] + pb[None, :, :]).reshape(-1, num_e)
            blocks.append(comb)
        out.append(np.concatenate(blocks))
    return out


def quantitative_synth(model: MomdpModel, prune: bool = True,
                       cap: int = DEFAULT_CROSS_SUM_CAP,
                       dominance_limit: int = 4096) -> list[list[np.ndarray]]:
    """Stagewise beta sets for the success-probability-only problem."""
    stages: list[list[np.ndarray] | None] = [None] * (model.horizon + 1)
    stages[model.horizon] = quantitative_terminal(model)
    for k in range(model.horizon - 1, -1, -1):
        sets = quantitative_backup(model, stages[k + 1], cap=cap)
        if prune:
            pruned = []
            for mat in sets:
                keep = _dedup_indices(mat)
                mat = mat[keep]
                if len(mat) <= dominance_limit:
                    mat = mat[~_dominated_mask(mat)]
                pruned.append(mat)
            sets = pruned
        stages[k] = sets
    return stages


def beta_envelope(beta_set: np.ndarray, b) -> float:
    """Upper envelope of a beta vector set at belief b."""
    return float((beta_set @ b).max())


# ---------------------------------------------------------------------------
# Brute-force policy enumeration oracle.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    """Constrained optimum over all deterministic history-feedback policies.

    ``min_time`` is the minimal expected number of stages spent outside the
    target set among policies whose reach probability is within the tie
    tolerance of ``max_reach``. ``first_actions`` lists every initial action
    consistent with some optimal policy, for tie-robust comparisons.
    """

    max_reach: float
    min_time: float
    first_actions: tuple[int, ...]
    policy_count: int


def brute_force_oracle(model: MomdpModel, s0: int, b0,
                       cap: int = DEFAULT_POLICY_CAP,
                       tie_tol: float = DEFAULT_TIE_TOL) -> OracleResult:
    """Evaluate every deterministic history-feedback policy exactly.

    A policy assigns an action to each reachable (state, observation)
    history prefix. The enumeration walks the history tree once: at a node,
    the alternatives for each action are combined with the cross product of
    the children's alternatives, which scores every policy of the subtree
    exactly (by summing over all hidden-state and observation paths) without
    re-walking shared prefixes. Subtrees reached with probability zero
    contribute nothing and collapse to a single alternative, so only
    distinct reachable histories count toward the policy total.

    Raises IntractableError when the number of enumerated policies would
    exceed ``cap``.
    """
    num_s, num_z, num_a = model.num_s, model.num_z, model.num_a
    horizon = model.horizon
    target = model.target_vec

    def subtree(s: int, w_live: np.ndarray, w_hit: np.ndarray, k: int) -> np.ndarray:
        # w_live carries paths that have not yet touched the target, w_hit
        # the rest; both are joint weights over the hidden state.
        if target[s]:
            w_hit = w_hit + w_live
            w_live = np.zeros_like(w_live)
            time_c = 0.0
        else:
            time_c = float(w_live.sum() + w_hit.sum())
        if k == horizon:
            return np.array([[float(w_hit.sum()), time_c]])
        if float(w_live.sum() + w_hit.sum()) == 0.0:
            return np.zeros((1, 2))
        blocks = []
        for a in range(num_a):
            vals = np.array([[0.0, time_c]])
            ts = model.t_s[s, :, a, :]
            te = model.t_e[s, :, a, :, :]
            m_live = np.einsum("e,ep,epq->pq", w_live, ts, te)
            m_hit = np.einsum("e,ep,epq->pq", w_hit, ts, te)
            for s2 in range(num_s):
                for z in range(num_z):
                    o = model.obs[s2, :, a, z]
                    wl2 = m_live[s2] * o
                    wh2 = m_hit[s2] * o
                    if float(wl2.sum() + wh2.sum()) == 0.0:
                        continue
                    child = subtree(s2, wl2, wh2, k + 1)
                    if len(vals) * len(child) > cap:
                        raise IntractableError(
                            f"policy enumeration exceeds cap {cap}"
                        )
                    vals = (vals[:, None, :] + child[None, :, :]).reshape(-1, 2)
            blocks.append(vals)
        return np.concatenate(blocks)

    b0 = np.asarray(b0, dtype=float)
    w_live = b0.copy()
    w_hit = np.zeros_like(b0)
    if target[s0]:
        w_hit, w_live = w_live, w_hit
        time_c = 0.0
    else:
        time_c = 1.0
    if horizon == 0:
        reach = float(w_hit.sum())
        return OracleResult(reach, time_c, (), 1)

    action_values = []
    for a in range(num_a):
        vals = np.array([[0.0, time_c]])
        ts = model.t_s[s0, :, a, :]
        te = model.t_e[s0, :, a, :, :]
        m_live = np.einsum("e,ep,epq->pq", w_live, ts, te)
        m_hit = np.einsum("e,ep,epq->pq", w_hit, ts, te)
        for s2 in range(num_s):
            for z in range(num_z):
                o = model.obs[s2, :, a, z]
                wl2 = m_live[s2] * o
                wh2 = m_hit[s2] * o
                if float(wl2.sum() + wh2.sum()) == 0.0:
                    continue
                child = subtree(s2, wl2, wh2, 1)
                if len(vals) * len(child) > cap:
                    raise IntractableError(f"policy enumeration exceeds cap {cap}")
                vals = (vals[:, None, :] + child[None, :, :]).reshape(-1, 2)
        action_values.append(vals)

    all_vals = np.concatenate(action_values)
    reach = all_vals[:, 0]
    times = all_vals[:, 1]
    p_max = float(reach.max())
    admissible = reach >= p_max - tie_tol
    t_min = float(times[admissible].min())
    winners = admissible & (times <= t_min + tie_tol)
    first_actions = []
    offset = 0
    for a, vals in enumerate(action_values):
        if winners[offset:offset + len(vals)].any():
            first_actions.append(a)
        offset += len(vals)
    return OracleResult(p_max, t_min, tuple(first_actions), len(all_vals))
