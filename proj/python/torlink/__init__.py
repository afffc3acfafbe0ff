"""Python access to the torlink toolkit.

Scenario runs return the same report the command line writes, as a dict.
"""

import json as _json

from . import _torlink
from ._torlink import (
    FieldPair,
    ParseError,
    TorlinkError,
    ValidationError,
    list_scenarios,
    model_map_degree,
    scenario_text,
    sphere_degree,
)

__version__ = _torlink.__version__


def run_scenario(config, jobs=0, seed=None, tol=None, out_dir=None):
    """Run a built-in scenario name or config file path and return the report dict.

    Files are written only when out_dir is given.
    """
    text = _torlink._run(str(config), jobs, seed, tol, None if out_dir is None else str(out_dir))
    return _json.loads(text)


def load_scenario(config):
    """Parsed config echo of a built-in scenario or config file."""
    return _json.loads(_torlink._echo(str(config)))


__all__ = [
    "FieldPair",
    "ParseError",
    "TorlinkError",
    "ValidationError",
    "list_scenarios",
    "load_scenario",
    "model_map_degree",
    "run_scenario",
    "scenario_text",
    "sphere_degree",
]
