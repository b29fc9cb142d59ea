"""Declarative grid worlds compiled into validated MOMDPs.

A grid has known obstacles (bumping them is a no-op move), goal regions,
and uncertain regions whose traversability is a latent Bernoulli bit.
Entering an uncertain cell whose bit says "blocked" is a collision and
transitions to an absorbing failure state, which encodes the reach-avoid
objective directly in the observable dynamics. Goal regions may carry a
sample-presence prior; a goal with prior one is a plain absorbing target
cell, while an uncertain goal routes to an absorbing success state only
when its presence bit is set, so the target stays a subset of the
observable states.

The hidden space is the product of all latent bits (regions first, then
uncertain goals; bit i is the i-th factor, least significant first) and the
observation space is one binary reading per factor, emitted about every
factor simultaneously each step. Reading accuracy depends only on the cell
the agent lands in, through one of two models:

* ``adjacency``: exact reading within Manhattan distance one of the region,
  correct with probability 0.8 from a diagonal neighbor, uninformative
  otherwise.
* ``decay``: accuracy decays with Manhattan distance d, for regions
  1 if d <= 1 else 0.5 + 0.3 exp(-(d - 2) / 2.5), and for goal samples
  1 if d = 0 else 0.5 + 0.25 exp(-d / 1.5).

Multi-cell factors use the minimum distance over their cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelError
from .model import MomdpModel, validate_model

NORTH, SOUTH, EAST, WEST = 0, 1, 2, 3
ACTION_NAMES = ("north", "south", "east", "west")
# (row, col) deltas; row 0 is the top row.
ACTION_DELTAS = ((-1, 0), (1, 0), (0, 1), (0, -1))

ADJACENCY = "adjacency"
DECAY = "decay"

# Reading alphabet for a single factor. The "none" symbol is reserved for
# completeness of the interface; every accuracy model below assigns it
# probability zero, so compiled observation alphabets are binary.
READ_FREE, READ_BLOCKED, READ_NONE = 0, 1, 2

Cell = tuple[int, int]


@dataclass(frozen=True)
class UncertainRegion:
    cells: tuple[Cell, ...]
    traversable_prior: float


@dataclass(frozen=True)
class GoalRegion:
    cells: tuple[Cell, ...]
    sample_prior: float = 1.0


@dataclass(frozen=True)
class GridSpec:
    """Declarative grid world input; see the module docstring for semantics."""

    width: int
    height: int
    obstacles: frozenset[Cell]
    goals: tuple[GoalRegion, ...]
    regions: tuple[UncertainRegion, ...]
    obs_model: str = ADJACENCY
    horizon: int = 0
    start_cell: Cell = (0, 0)


def validate_spec(spec: GridSpec) -> list[str]:
    """All structural problems with the spec, empty when compilable."""
    problems = []
    if spec.width < 1 or spec.height < 1:
        problems.append(f"grid dimensions must be positive, got {spec.width}x{spec.height}")

    def in_bounds(cell):
        r, c = cell
        return 0 <= r < spec.height and 0 <= c < spec.width

    for cell in spec.obstacles:
        if not in_bounds(cell):
            problems.append(f"obstacle {cell} out of bounds")
    claimed: dict[Cell, str] = {}

    def claim(cells, label):
        for cell in cells:
            if not in_bounds(cell):
                problems.append(f"{label} cell {cell} out of bounds")
            if cell in spec.obstacles:
                problems.append(f"{label} cell {cell} collides with an obstacle")
            prev = claimed.get(cell)
            if prev is not None:
                problems.append(f"{label} cell {cell} already used by {prev}")
            claimed[cell] = label

    if not spec.goals:
        problems.append("at least one goal region is required")
    for i, goal in enumerate(spec.goals):
        if not goal.cells:
            problems.append(f"goal {i} has no cells")
        if not 0.0 <= goal.sample_prior <= 1.0:
            problems.append(f"goal {i} prior {goal.sample_prior} outside [0, 1]")
        claim(goal.cells, f"goal {i}")
    for i, region in enumerate(spec.regions):
        if not region.cells:
            problems.append(f"region {i} has no cells")
        if not 0.0 <= region.traversable_prior <= 1.0:
            problems.append(f"region {i} prior {region.traversable_prior} outside [0, 1]")
        claim(region.cells, f"region {i}")
    if not in_bounds(spec.start_cell):
        problems.append(f"start cell {spec.start_cell} out of bounds")
    elif spec.start_cell in spec.obstacles:
        problems.append("start cell is an obstacle")
    elif claimed.get(spec.start_cell, "").startswith("region"):
        problems.append("start cell lies inside an uncertain region")
    if spec.obs_model not in (ADJACENCY, DECAY):
        problems.append(f"unknown obs_model {spec.obs_model!r}")
    if spec.horizon < 0:
        problems.append("horizon must be nonnegative")
    return problems


def _min_distance(cell: Cell, cells) -> int:
    return min(abs(cell[0] - r) + abs(cell[1] - c) for r, c in cells)


def adjacency_accuracy(cell: Cell, region_cells) -> float:
    """Reading accuracy about a region from ``cell`` in the adjacency model."""
    if _min_distance(cell, region_cells) <= 1:
        return 1.0
    if any(abs(cell[0] - r) == 1 and abs(cell[1] - c) == 1 for r, c in region_cells):
        return 0.8
    return 0.5


def adjacency_goal_accuracy(cell: Cell, goal_cells) -> float:
    # Same shape as the region rule shifted by one cell: exact on the goal,
    # 0.8 from a cardinal neighbor, uninformative farther out.
    d = _min_distance(cell, goal_cells)
    if d == 0:
        return 1.0
    if d == 1:
        return 0.8
    return 0.5


def decay_observation_region(d: float) -> float:
    """Accuracy of a region reading at Manhattan distance d (decay model)."""
    if d <= 1:
        return 1.0
    return 0.5 + 0.3 * np.exp(-(d - 2.0) / 2.5)


def decay_observation_goal(d: float) -> float:
    """Accuracy of a goal-sample reading at Manhattan distance d (decay model)."""
    if d == 0:
        return 1.0
    return 0.5 + 0.25 * np.exp(-d / 1.5)


def adjacency_observation(cell: Cell, region_cells, bit: int) -> np.ndarray:
    """Distribution over (free, blocked, none) readings about one region.

    ``bit`` is the region's latent state, one meaning traversable. The
    "none" symbol always has probability zero; far cells are uninformative
    because the reading is then independent of the bit, not absent.
    """
    acc = adjacency_accuracy(cell, region_cells)
    dist = np.zeros(3)
    if bit:
        dist[READ_FREE], dist[READ_BLOCKED] = acc, 1.0 - acc
    else:
        dist[READ_BLOCKED], dist[READ_FREE] = acc, 1.0 - acc
    return dist


@dataclass(frozen=True)
class FactorInfo:
    """One latent Bernoulli factor of the compiled hidden space."""

    kind: str  # "region" or "goal"
    cells: tuple[Cell, ...]
    prior: float


@dataclass(eq=False)
class CompiledGrid:
    """A compiled grid: the MOMDP plus every index map needed to use it."""

    spec: GridSpec
    model: MomdpModel
    cell_to_state: dict[Cell, int]
    state_to_cell: tuple[Cell | None, ...]
    fail_state: int
    success_state: int | None
    factors: tuple[FactorInfo, ...]
    start_state: int
    initial_belief: np.ndarray

    @property
    def fail_states(self) -> frozenset[int]:
        return frozenset({self.fail_state})


def _factor_list(spec: GridSpec) -> list[FactorInfo]:
    factors = [FactorInfo("region", tuple(r.cells), r.traversable_prior)
               for r in spec.regions]
    factors += [FactorInfo("goal", tuple(g.cells), g.sample_prior)
                for g in spec.goals if g.sample_prior < 1.0]
    return factors


def initial_belief_for(spec: GridSpec) -> np.ndarray:
    """Product-of-priors belief over the compiled hidden space."""
    factors = _factor_list(spec)
    m = len(factors)
    b = np.ones(2 ** m)
    for e in range(2 ** m):
        p = 1.0
        for i, f in enumerate(factors):
            p *= f.prior if (e >> i) & 1 else 1.0 - f.prior
        b[e] = p
    return b


def sample_environment(spec: GridSpec, seed: int) -> int:
    """Draw one latent realization: an independent Bernoulli per factor."""
    factors = _factor_list(spec)
    rng = np.random.default_rng(seed)
    e = 0
    for i, f in enumerate(factors):
        if rng.random() < f.prior:
            e |= 1 << i
    return e


def compile_grid(spec: GridSpec) -> CompiledGrid:
    """Compile a grid spec into a validated MOMDP with its index maps.

    Observable states are the non-obstacle cells in row-major order,
    followed by the absorbing failure state and, when any goal is
    uncertain, an absorbing success state. Movement is deterministic;
    bumping an obstacle or the boundary keeps position, while entering an
    uncertain cell succeeds or fails according to its latent bit. Hidden
    bits are static (identity dynamics). The target set contains the
    certain goal cells and the success state.
    """
    problems = validate_spec(spec)
    if problems:
        raise ModelError("invalid grid spec: " + "; ".join(problems))

    cells = [(r, c) for r in range(spec.height) for c in range(spec.width)
             if (r, c) not in spec.obstacles]
    cell_to_state = {cell: i for i, cell in enumerate(cells)}
    fail_state = len(cells)
    factors = _factor_list(spec)
    has_uncertain_goal = any(f.kind == "goal" for f in factors)
    success_state = fail_state + 1 if has_uncertain_goal else None
    num_s = fail_state + (2 if has_uncertain_goal else 1)

    m = len(factors)
    num_e = 2 ** m
    num_z = 2 ** m
    num_a = len(ACTION_DELTAS)

    region_of: dict[Cell, int] = {}
    for i, f in enumerate(factors):
        if f.kind == "region":
            for cell in f.cells:
                region_of[cell] = i
    certain_goal_cells = set()
    uncertain_goal_of: dict[Cell, int] = {}
    for g in spec.goals:
        if g.sample_prior >= 1.0:
            certain_goal_cells.update(g.cells)
    for i, f in enumerate(factors):
        if f.kind == "goal":
            for cell in f.cells:
                uncertain_goal_of[cell] = i

    t_s = np.zeros((num_s, num_e, num_a, num_s))
    for cell in cells:
        s = cell_to_state[cell]
        for e in range(num_e):
            for a, (dr, dc) in enumerate(ACTION_DELTAS):
                if cell in certain_goal_cells:
                    t_s[s, e, a, s] = 1.0
                    continue
                gi = uncertain_goal_of.get(cell)
                if gi is not None and (e >> gi) & 1:
                    t_s[s, e, a, success_state] = 1.0
                    continue
                dest = (cell[0] + dr, cell[1] + dc)
                if (not (0 <= dest[0] < spec.height and 0 <= dest[1] < spec.width)
                        or dest in spec.obstacles):
                    dest = cell
                ri = region_of.get(dest)
                if ri is not None and not (e >> ri) & 1:
                    t_s[s, e, a, fail_state] = 1.0
                else:
                    t_s[s, e, a, cell_to_state[dest]] = 1.0
    t_s[fail_state, :, :, fail_state] = 1.0
    if success_state is not None:
        t_s[success_state, :, :, success_state] = 1.0

    # Static hidden state: identity dynamics.
    t_e = np.zeros((num_s, num_e, num_a, num_s, num_e))
    for e in range(num_e):
        t_e[:, e, :, :, e] = 1.0

    # Per-state, per-factor reading accuracies; terminal states read noise.
    acc = np.full((num_s, max(m, 1)), 0.5)
    for cell in cells:
        s = cell_to_state[cell]
        for i, f in enumerate(factors):
            if spec.obs_model == ADJACENCY:
                if f.kind == "region":
                    acc[s, i] = adjacency_accuracy(cell, f.cells)
                else:
                    acc[s, i] = adjacency_goal_accuracy(cell, f.cells)
            else:
                d = _min_distance(cell, f.cells)
                if f.kind == "region":
                    acc[s, i] = decay_observation_region(d)
                else:
                    acc[s, i] = decay_observation_goal(d)

    if m == 0:
        obs = np.ones((num_s, num_e, num_a, num_z))
    else:
        bits = np.array([[(v >> i) & 1 for i in range(m)] for v in range(num_e)])
        agree = bits[:, None, :] == bits[None, :, :]            # (E, Z, m)
        term = np.where(agree[None, :, :, :], acc[:, None, None, :],
                        1.0 - acc[:, None, None, :])            # (S, E, Z, m)
        obs_sez = term.prod(axis=-1)
        obs = np.repeat(obs_sez[:, :, None, :], num_a, axis=2)

    target = {cell_to_state[c] for c in certain_goal_cells}
    if success_state is not None:
        target.add(success_state)

    model = MomdpModel(
        num_s=num_s, num_e=num_e, num_a=num_a, num_z=num_z,
        t_s=t_s, t_e=t_e, obs=obs,
        target=frozenset(target), horizon=spec.horizon,
    )
    violations = validate_model(model)
    if violations:  # compile must only ever produce consistent models
        raise ModelError(
            "compiled model failed validation: "
            + "; ".join(str(v) for v in violations[:5])
        )

    state_to_cell: list[Cell | None] = list(cells) + [None]
    if has_uncertain_goal:
        state_to_cell.append(None)
    return CompiledGrid(
        spec=spec,
        model=model,
        cell_to_state=cell_to_state,
        state_to_cell=tuple(state_to_cell),
        fail_state=fail_state,
        success_state=success_state,
        factors=tuple(factors),
        start_state=cell_to_state[spec.start_cell],
        initial_belief=initial_belief_for(spec),
    )


def parse_ascii_grid(text: str, region_priors, horizon: int,
                     start_cell: Cell, obs_model: str = ADJACENCY,
                     goal_prior: float = 1.0) -> GridSpec:
    """Build a GridSpec from an ASCII map.

    Characters: ``.`` free cell, ``#`` obstacle, ``G`` goal cell, digits
    1-9 uncertain-region ids. All rows must have equal width. Region priors
    come from the sidecar ``region_priors`` (a mapping from region id to
    prior, or a sequence indexed by id - 1); all ``G`` cells form a single
    goal region with ``goal_prior``.
    """
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise ModelError("empty ASCII grid")
    width = len(rows[0])
    if any(len(row) != width for row in rows):
        raise ModelError("ASCII grid rows have unequal widths")
    obstacles = set()
    goal_cells = []
    region_cells: dict[int, list[Cell]] = {}
    for r, row in enumerate(rows):
        for c, ch in enumerate(row):
            if ch == "#":
                obstacles.add((r, c))
            elif ch == "G":
                goal_cells.append((r, c))
            elif ch.isdigit() and ch != "0":
                region_cells.setdefault(int(ch), []).append((r, c))
            elif ch != ".":
                raise ModelError(f"unknown grid character {ch!r} at {(r, c)}")

    def prior_for(rid: int) -> float:
        if isinstance(region_priors, dict):
            try:
                return float(region_priors[rid])
            except KeyError:
                raise ModelError(f"no prior supplied for region {rid}") from None
        try:
            return float(region_priors[rid - 1])
        except IndexError:
            raise ModelError(f"no prior supplied for region {rid}") from None

    regions = tuple(
        UncertainRegion(tuple(region_cells[rid]), prior_for(rid))
        for rid in sorted(region_cells)
    )
    return GridSpec(
        width=width, height=len(rows),
        obstacles=frozenset(obstacles),
        goals=(GoalRegion(tuple(goal_cells), goal_prior),),
        regions=regions,
        obs_model=obs_model, horizon=horizon, start_cell=tuple(start_cell),
    )
