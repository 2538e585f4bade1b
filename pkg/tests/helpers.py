"""Shared test helpers."""

from __future__ import annotations

import numpy as np
from metricgov.scenarios import scenario_spaces
from metricgov.spaces import FiniteTable, Strings, Subsets

TRIALS = 10_000


def all_spaces(seed: int = 0) -> dict:
    """One space per kind, including the random table metric."""
    spaces = scenario_spaces(np.random.default_rng(seed))
    spaces["subsets-fixed"] = Subsets(("a", "b", "c", "d", "e"), 2)
    spaces["strings-long"] = Strings("ab", 5)
    return spaces


def star_table() -> FiniteTable:
    return FiniteTable.from_edges(["h", "l1", "l2", "l3"], [("h", "l1", 1), ("h", "l2", 1), ("h", "l3", 1)])


RUNNING_VOTES = [(0.5, 0.3, 0.2), (0.5, 0.2, 0.3), (0.3, 0.5, 0.2), (0.2, 0.4, 0.4), (0.2, 0.6, 0.2)]
RUNNING_SQ = (1 / 3, 1 / 3, 1 / 3)
