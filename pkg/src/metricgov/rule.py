"""Utilities, aggregators, the support gate and the per-round rule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Any, Sequence

import numpy as np

from .spaces import MetricSpace

REL_TOL = 1e-12


class EmptyVector(ValueError):
    pass


class InvalidThreshold(ValueError):
    pass


def as_fraction(value) -> Fraction:
    """Read a threshold given as ``Fraction``, ``"p/q"`` text, int or float."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(value).limit_denominator(10**6)


def check_sigma(sigma) -> Fraction:
    sigma = as_fraction(sigma)
    if not Fraction(1, 2) <= sigma < 1:
        raise InvalidThreshold(f"threshold {sigma} outside [1/2, 1)")
    return sigma


def support_threshold(sigma, n: int) -> int:
    """``ceil(sigma * n)``, computed exactly."""
    return math.ceil(as_fraction(sigma) * n)


def _is_exact(values) -> bool:
    return all(isinstance(v, Rational) for v in values)


def _tolerance(values) -> float:
    if _is_exact(values):
        return 0
    scale = max((abs(float(v)) for v in values), default=0.0)
    return REL_TOL * max(1.0, scale)


def _positive(x, tol) -> bool:
    return x > tol


def kth_largest(values: Sequence, k: int):
    if _is_exact(values):
        return sorted(values, reverse=True)[k - 1]
    arr = np.asarray(values, dtype=float)
    # introselect, linear time
    return float(np.partition(arr, len(arr) - k)[len(arr) - k])


@dataclass(frozen=True)
class GeneralisedMedian:
    """The ``ceil(sigma * n)``-th largest utility."""

    sigma: Any = Fraction(1, 2)
    name = "median"

    def __post_init__(self):
        object.__setattr__(self, "sigma", check_sigma(self.sigma))

    def __call__(self, u: Sequence):
        if len(u) == 0:
            raise EmptyVector("cannot aggregate an empty utility vector")
        return kth_largest(list(u), support_threshold(self.sigma, len(u)))

    def to_dict(self) -> dict:
        return {"kind": self.name, "sigma": str(self.sigma)}


@dataclass(frozen=True)
class Mean:
    name = "mean"

    def __call__(self, u: Sequence):
        if len(u) == 0:
            raise EmptyVector("cannot aggregate an empty utility vector")
        if _is_exact(u):
            return Fraction(sum(u), len(u))
        return math.fsum(float(x) for x in u) / len(u)

    def to_dict(self) -> dict:
        return {"kind": self.name}


Aggregator = GeneralisedMedian | Mean


def aggregator_from_dict(data) -> Aggregator:
    if isinstance(data, str):
        data = {"kind": data}
    kind = data.get("kind", "median")
    if kind == "median":
        return GeneralisedMedian(data.get("sigma", Fraction(1, 2)))
    if kind == "mean":
        return Mean()
    raise ValueError(f"unknown aggregator {kind!r}")


def aggregate_score(agg: Aggregator, u: Sequence):
    return agg(u)


def utility(space: MetricSpace, s, q, p):
    """Gain of member with ideal ``q`` when ``p`` replaces the status quo ``s``."""
    return space.distance(q, s) - space.distance(q, p)


def utility_vector(space: MetricSpace, s, votes: Sequence, p) -> tuple:
    return tuple(space.distance(v, s) - space.distance(v, p) for v in votes)


def support_set(space: MetricSpace, s, votes: Sequence, p) -> frozenset[int]:
    """Indices of members who strictly prefer ``p`` to ``s``."""
    u = utility_vector(space, s, votes, p)
    tol = _tolerance(u)
    return frozenset(i for i, x in enumerate(u) if _positive(x, tol))


def is_supported(space: MetricSpace, s, votes: Sequence, p, sigma) -> bool:
    # at sigma = 1/2 with even n this is "at least half", not a strict majority
    return len(support_set(space, s, votes, p)) >= support_threshold(check_sigma(sigma), len(votes))


@dataclass(frozen=True)
class ProposalScore:
    point: Any
    utilities: tuple
    score: Any
    supporters: frozenset
    supported: bool


@dataclass(frozen=True)
class RoundResult:
    winner: Any
    winning_score: Any
    scores: tuple[ProposalScore, ...] = field(default=())

    @property
    def has_winner(self) -> bool:
        return self.winning_score is not None

    def score_of(self, point) -> ProposalScore:
        for entry in self.scores:
            if entry.point == point:
                return entry
        raise KeyError(point)

    def to_dict(self, space: MetricSpace) -> dict:
        enc = space.encode_point
        return {
            "winner": None if self.winning_score is None else enc(self.winner),
            "winning_score": _num(self.winning_score),
            "proposals": [
                {
                    "point": enc(e.point),
                    "utilities": [_num(x) for x in e.utilities],
                    "score": _num(e.score),
                    "supporters": sorted(e.supporters),
                    "supported": e.supported,
                }
                for e in self.scores
            ],
        }


def _num(x):
    if x is None:
        return None
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else str(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    return float(x)


def score_proposal(space: MetricSpace, s, votes: Sequence, p, agg: Aggregator, sigma) -> ProposalScore:
    u = utility_vector(space, s, votes, p)
    tol = _tolerance(u)
    supporters = frozenset(i for i, x in enumerate(u) if _positive(x, tol))
    need = support_threshold(sigma, len(votes))
    return ProposalScore(p, u, agg(u), supporters, len(supporters) >= need)


def _dedupe(proposals) -> list:
    seen, out = set(), []
    for p in proposals:
        key = tuple(p) if isinstance(p, list) else p
        if key not in seen:
            seen.add(key)
            out.append(key)
    return out


def round_winner(space: MetricSpace, s, votes: Sequence, proposals, agg: Aggregator, sigma=None) -> RoundResult:
    """Adopt the supported proposal with positive maximal score, if any.

    Ties go to the proposal first in the space's canonical order. Every
    proposal is scored against the status quo alone, never against another
    proposal.
    """
    if sigma is None:
        if not isinstance(agg, GeneralisedMedian):
            raise InvalidThreshold("the mean aggregator needs an explicit threshold")
        sigma = agg.sigma
    sigma = check_sigma(sigma)
    points = _dedupe(proposals)
    if not points:
        raise ValueError("proposal set is empty")
    scored = tuple(score_proposal(space, s, votes, p, agg, sigma) for p in points)
    eligible = [e for e in scored if e.supported]
    if not eligible:
        return RoundResult(None, None, scored)
    best = max(e.score for e in eligible)
    tol = _tolerance([e.score for e in eligible])
    if not _positive(best, tol):
        return RoundResult(None, None, scored)
    top = [e for e in eligible if e.score >= best - tol]
    win = min(top, key=lambda e: space.sort_key(e.point))
    return RoundResult(win.point, win.score, scored)


def majoritarity_check(space: MetricSpace, s, votes: Sequence, sigma):
    """Return the ideal shared by at least ``ceil(sigma n)`` members, if one differs from ``s``.

    For ``sigma > 1/2`` or odd ``n`` the rule must adopt it.
    """
    need = support_threshold(check_sigma(sigma), len(votes))
    counts: dict = {}
    order = []
    for v in votes:
        key = tuple(v) if isinstance(v, list) else v
        if key not in counts:
            order.append(key)
        counts[key] = counts.get(key, 0) + 1
    for w in order:
        if counts[w] >= need and space.distance(w, s) > 0:
            return w
    return None
