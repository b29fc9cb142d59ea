"""Bundled example grid worlds.

``gate1x3`` is the smallest interesting world: a single uncertain cell
between start and goal. The ``grid5x5``/``grid10x5``/``grid15x15`` layouts
are best-effort reconstructions of walled worlds whose only passages are
uncertain gates; their exact obstacle placement is illustrative, not
canonical. ``samples5x5`` demonstrates uncertain goal regions with the
distance-decay observation model.
"""

from importlib import resources

from ..fileio import gridspec_from_dict
from ..gridworld import GridSpec

import json

_PACKAGE = resources.files(__name__)


def list_worlds() -> list[str]:
    return sorted(
        p.name[:-5] for p in _PACKAGE.iterdir() if p.name.endswith(".json")
    )


def world_path(name: str):
    """Filesystem path of a bundled world (for CLI invocations)."""
    path = _PACKAGE / f"{name}.json"
    if not path.is_file():
        raise FileNotFoundError(f"no bundled world named {name!r}; "
                                f"available: {', '.join(list_worlds())}")
    return path


def load_world(name: str) -> GridSpec:
    return gridspec_from_dict(json.loads(world_path(name).read_text()))
