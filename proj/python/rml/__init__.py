"""Randomized-midpoint Langevin samplers (Python bindings)."""

import json

from ._core import *  # noqa: F401,F403
from ._core import __version__, registry_json
from ._core import run_experiment as _run_experiment


def registry():
    """Built-in potentials, samplers, schedules and test functions."""
    return json.loads(registry_json())


def run_experiment(config, out, seed=None, workers=1, format="csv"):
    """Run an INI experiment config; returns exit code, error, files and parsed summary."""
    r = _run_experiment(config, out, seed=seed, workers=workers, format=format)
    text = r.pop("summary_json")
    r["summary"] = None if text == "null" else json.loads(text)
    return r
