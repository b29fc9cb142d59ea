"""JSON readers and writers for models, stacks, point sets, and grids.

All formats use 0-based indices and plain nested arrays. Floats are written
with Python's shortest round-trip representation, so a load of a written
file reproduces every value bit for bit and writing it again yields
byte-identical text.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ModelError
from .exact import GammaStack, PairSet
from .gridworld import GoalRegion, GridSpec, UncertainRegion
from .model import MomdpModel
from .pointbased import BeliefPointSet


def _dump(payload, path) -> None:
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def _load(path) -> dict:
    return json.loads(Path(path).read_text())


# -- models -----------------------------------------------------------------

def model_to_dict(model: MomdpModel) -> dict:
    return {
        "num_s": model.num_s,
        "num_e": model.num_e,
        "num_a": model.num_a,
        "num_z": model.num_z,
        "t_s": model.t_s.tolist(),
        "t_e": model.t_e.tolist(),
        "obs": model.obs.tolist(),
        "target": sorted(model.target),
        "horizon": model.horizon,
    }


def model_from_dict(data: dict) -> MomdpModel:
    try:
        return MomdpModel(
            num_s=int(data["num_s"]),
            num_e=int(data["num_e"]),
            num_a=int(data["num_a"]),
            num_z=int(data["num_z"]),
            t_s=np.asarray(data["t_s"], dtype=float),
            t_e=np.asarray(data["t_e"], dtype=float),
            obs=np.asarray(data["obs"], dtype=float),
            target=frozenset(data["target"]),
            horizon=int(data["horizon"]),
        )
    except KeyError as missing:
        raise ModelError(f"model file is missing field {missing}") from None


def save_model(model: MomdpModel, path) -> None:
    _dump(model_to_dict(model), path)


def load_model(path) -> MomdpModel:
    return model_from_dict(_load(path))


# -- stage stacks -----------------------------------------------------------

def stack_to_dict(stack: GammaStack) -> dict:
    stages = []
    for sets in stack.stages:
        stages.append([
            [
                {
                    "alpha": ps.alphas[i].tolist(),
                    "beta": ps.betas[i].tolist(),
                    "action": None if ps.actions[i] < 0 else int(ps.actions[i]),
                }
                for i in range(len(ps))
            ]
            for ps in sets
        ])
    return {
        "flavor": stack.flavor,
        "variant": stack.variant,
        "num_e": stack.stages[-1][0].num_e,
        "stages": stages,
    }


def stack_from_dict(data: dict) -> GammaStack:
    num_e = int(data["num_e"])
    stages = []
    for stage in data["stages"]:
        sets = []
        for entries in stage:
            alphas = np.array([p["alpha"] for p in entries], dtype=float)
            betas = np.array([p["beta"] for p in entries], dtype=float)
            actions = np.array(
                [-1 if p["action"] is None else int(p["action"]) for p in entries],
                dtype=np.int64,
            )
            sets.append(PairSet(num_e, alphas, betas, actions))
        stages.append(sets)
    return GammaStack(stages, data["flavor"], data["variant"])


def save_stack(stack: GammaStack, path) -> None:
    _dump(stack_to_dict(stack), path)


def load_stack(path) -> GammaStack:
    return stack_from_dict(_load(path))


# -- belief point sets ------------------------------------------------------

def points_to_dict(points: BeliefPointSet) -> dict:
    return {
        "seed": points.seed,
        "points": points.points.tolist(),
        "provenance": list(points.provenance),
    }


def points_from_dict(data: dict) -> BeliefPointSet:
    return BeliefPointSet(
        points=np.asarray(data["points"], dtype=float),
        provenance=tuple(data["provenance"]),
        seed=int(data["seed"]),
    )


def save_points(points: BeliefPointSet, path) -> None:
    _dump(points_to_dict(points), path)


def load_points(path) -> BeliefPointSet:
    return points_from_dict(_load(path))


# -- grid specs ---------------------------------------------------------------

def gridspec_to_dict(spec: GridSpec) -> dict:
    return {
        "width": spec.width,
        "height": spec.height,
        "obstacles": sorted(list(c) for c in spec.obstacles),
        "goals": [
            {"cells": [list(c) for c in g.cells], "sample_prior": g.sample_prior}
            for g in spec.goals
        ],
        "regions": [
            {"cells": [list(c) for c in r.cells], "traversable_prior": r.traversable_prior}
            for r in spec.regions
        ],
        "obs_model": spec.obs_model,
        "horizon": spec.horizon,
        "start_cell": list(spec.start_cell),
    }


def gridspec_from_dict(data: dict) -> GridSpec:
    try:
        return GridSpec(
            width=int(data["width"]),
            height=int(data["height"]),
            obstacles=frozenset(tuple(c) for c in data["obstacles"]),
            goals=tuple(
                GoalRegion(tuple(tuple(c) for c in g["cells"]),
                           float(g.get("sample_prior", 1.0)))
                for g in data["goals"]
            ),
            regions=tuple(
                UncertainRegion(tuple(tuple(c) for c in r["cells"]),
                                float(r["traversable_prior"]))
                for r in data["regions"]
            ),
            obs_model=data.get("obs_model", "adjacency"),
            horizon=int(data["horizon"]),
            start_cell=tuple(data["start_cell"]),
        )
    except KeyError as missing:
        raise ModelError(f"grid file is missing field {missing}") from None


def save_gridspec(spec: GridSpec, path) -> None:
    _dump(gridspec_to_dict(spec), path)


def load_gridspec(path) -> GridSpec:
    return gridspec_from_dict(_load(path))
