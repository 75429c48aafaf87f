"""Monte Carlo runs shared across test modules (computed once per session)."""
from __future__ import annotations

import dataclasses
import functools

from syncon import cli_io, montecarlo


@functools.lru_cache(maxsize=None)
def bundled(name: str, replications: int | None = None, estimators: tuple | None = None):
    s = cli_io.parse_scenario(cli_io.bundled_path(name, "scenarios").read_text())
    changes = {}
    if replications is not None:
        changes["replications"] = replications
    if estimators is not None:
        changes["estimators"] = estimators
    return montecarlo.run_mc(dataclasses.replace(s, **changes))
