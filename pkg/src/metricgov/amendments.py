"""Constitutions, self-amendment and the threshold h-rule."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Iterable, Sequence

from .rule import (
    Aggregator,
    GeneralisedMedian,
    InvalidThreshold,
    Mean,
    aggregator_from_dict,
    as_fraction,
    check_sigma,
    round_winner,
    _num,
)
from .spaces import FiniteTable, MetricSpace, space_from_dict

ORDINARY = "ordinary"
CONSTITUTIONAL = "constitutional"
FRAMEWORK_FIELDS = ("sigma", "phi", "space", "epsilon")


class UnknownComponent(KeyError):
    pass


# ---------------------------------------------------------------------------
# h-rule


def _threshold_votes(votes: Iterable) -> list[Fraction]:
    out = []
    for v in votes:
        f = as_fraction(v)
        if not Fraction(1, 2) <= f < 1:
            raise InvalidThreshold(f"threshold vote {v} outside [1/2, 1)")
        out.append(f)
    if not out:
        raise InvalidThreshold("no threshold votes")
    return out


def h_candidates(sigma, votes: Sequence, mode: str = "voted") -> list[Fraction]:
    sigma = check_sigma(sigma)
    votes = _threshold_votes(votes)
    cands = set(votes) | {sigma}
    if mode == "grid":
        cands |= {Fraction(j, 20) for j in range(10, 20)}
    elif mode != "voted":
        raise ValueError(f"unknown candidate mode {mode!r}")
    return sorted(cands)


def h_rule(sigma, votes: Sequence, mode: str = "voted") -> Fraction:
    """New threshold after members vote for preferred thresholds.

    Raise to the largest candidate ``t > sigma`` that at least ``ceil(t n)``
    members voted at or above; otherwise lower to the smallest ``t < sigma``
    that at least ``ceil(sigma n)`` members voted at or below; otherwise keep
    ``sigma``. ``mode`` selects the candidates: the voted values, or those
    plus the grid of twentieths.
    """
    sigma = check_sigma(sigma)
    votes = _threshold_votes(votes)
    n = len(votes)
    cands = h_candidates(sigma, votes, mode)
    raises = [t for t in cands if t > sigma and sum(v >= t for v in votes) >= math.ceil(t * n)]
    if raises:
        return max(raises)
    need = math.ceil(sigma * n)
    lowers = [t for t in cands if t < sigma and sum(v <= t for v in votes) >= need]
    if lowers:
        return min(lowers)
    return sigma


# ---------------------------------------------------------------------------
# membership

IN_OUT = FiniteTable(("in", "out"), ((0.0, 1.0), (1.0, 0.0)))


def membership_referendum(candidate, in_votes: int, n: int, sigma, consent: bool, is_member: bool = False) -> str:
    """``admit``, ``retain`` or ``reject`` for one candidate.

    Each member votes ``in`` or ``out``; ``in`` must clear the support gate
    against non-membership. Newcomers must also consent.
    """
    sigma = check_sigma(sigma)
    if not 0 <= in_votes <= n or n < 1:
        raise ValueError("in_votes must lie in [0, n] with n >= 1")
    votes = ["in"] * in_votes + ["out"] * (n - in_votes)
    res = round_winner(IN_OUT, "out", votes, ["in", "out"], GeneralisedMedian(sigma), sigma)
    passed = res.winner == "in"
    if is_member:
        return "retain" if passed else "reject"
    return "admit" if passed and consent else "reject"


# ---------------------------------------------------------------------------
# constitutions


@dataclass(frozen=True)
class Component:
    name: str
    space: MetricSpace
    value: Any
    aggregator: Aggregator = field(default_factory=GeneralisedMedian)
    sigma: Any = Fraction(1, 2)
    epsilon: Any = None
    klass: str = ORDINARY

    def __post_init__(self):
        object.__setattr__(self, "sigma", check_sigma(self.sigma))
        if isinstance(self.aggregator, GeneralisedMedian) and self.aggregator.sigma != self.sigma:
            object.__setattr__(self, "aggregator", GeneralisedMedian(self.sigma))
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", self.space.default_epsilon())
        if not self.epsilon > 0:
            raise ValueError("novelty distance must be positive")
        if self.klass not in (ORDINARY, CONSTITUTIONAL):
            raise ValueError(f"unknown class {self.klass!r}")
        if self.aggregator([0] * 3) != 0:
            raise ValueError("aggregator must score the all-zero vector at 0")
        self.space.check(self.value)

    def to_dict(self) -> dict:
        return {
            "space": self.space.to_dict(),
            "status_quo": self.space.encode_point(self.value),
            "aggregator": self.aggregator.to_dict(),
            "sigma": str(self.sigma),
            "epsilon": _num(self.epsilon),
            "class": self.klass,
        }

    @classmethod
    def from_dict(cls, name: str, data: dict) -> Component:
        space = space_from_dict(data["space"])
        eps = data.get("epsilon")
        return cls(
            name,
            space,
            space.decode_point(data["status_quo"]),
            aggregator_from_dict(data.get("aggregator", "median")),
            as_fraction(data.get("sigma", "1/2")),
            None if eps is None else (Fraction(eps) if isinstance(eps, str) else eps),
            data.get("class", ORDINARY),
        )


@dataclass(frozen=True)
class AmendmentRecord:
    component: str
    old: Any
    new: Any
    trace: str | None = None


def _split(cid: str) -> tuple[str | None, str]:
    head, dot, tail = cid.partition(".")
    if dot and head in FRAMEWORK_FIELDS:
        return head, tail
    return None, cid


@dataclass(frozen=True)
class Constitution:
    components: tuple[tuple[str, Component], ...]
    membership: frozenset = frozenset()
    log: tuple[AmendmentRecord, ...] = ()

    @classmethod
    def create(cls, components: Iterable[Component], membership: Iterable = ()) -> Constitution:
        comps = tuple((c.name, c) for c in components)
        names = [n for n, _ in comps]
        if len(set(names)) != len(names):
            raise ValueError("duplicate component names")
        return cls(comps, frozenset(membership))

    @property
    def version(self) -> int:
        return len(self.log)

    def component(self, name: str) -> Component:
        for n, c in self.components:
            if n == name:
                return c
        raise UnknownComponent(name)

    def names(self) -> list[str]:
        return [n for n, _ in self.components]

    def value_of(self, cid: str):
        if cid == "membership":
            return self.membership
        fld, name = _split(cid)
        comp = self.component(name)
        if fld is None:
            return comp.value
        return {"sigma": comp.sigma, "phi": comp.aggregator, "space": comp.space, "epsilon": comp.epsilon}[fld]

    def to_dict(self) -> dict:
        return {
            "membership": sorted(self.membership, key=str),
            "components": {n: c.to_dict() for n, c in self.components},
        }

    @classmethod
    def from_dict(cls, data: dict) -> Constitution:
        comps = [Component.from_dict(n, d) for n, d in data["components"].items()]
        return cls.create(comps, data.get("membership", ()))


def classify_component(constitution: Constitution, cid: str) -> str:
    if cid == "membership":
        return CONSTITUTIONAL
    fld, name = _split(cid)
    comp = constitution.component(name)
    return CONSTITUTIONAL if fld is not None else comp.klass


def amend_component(constitution: Constitution, cid: str, outcome, trace: str | None = None) -> Constitution:
    """Return a new constitution with ``cid`` set to ``outcome``; the old one is untouched."""
    old = constitution.value_of(cid)
    if cid == "membership":
        new_value = frozenset(outcome)
        return replace(
            constitution,
            membership=new_value,
            log=constitution.log + (AmendmentRecord(cid, old, new_value, trace),),
        )
    fld, name = _split(cid)
    comp = constitution.component(name)
    if fld is None:
        comp.space.check(outcome)
        new_comp = replace(comp, value=outcome)
    elif fld == "sigma":
        sigma = check_sigma(outcome)
        # the generalised median's order statistic follows the gate
        agg = GeneralisedMedian(sigma) if isinstance(comp.aggregator, GeneralisedMedian) else comp.aggregator
        new_comp = replace(comp, sigma=sigma, aggregator=agg)
    elif fld == "phi":
        if isinstance(outcome, str):
            outcome = {"kind": outcome}
        if isinstance(outcome, dict):
            outcome = aggregator_from_dict({"sigma": comp.sigma, **outcome})
        agg = outcome
        if not isinstance(agg, (GeneralisedMedian, Mean)):
            raise TypeError(f"not an aggregator: {outcome!r}")
        new_comp = replace(comp, aggregator=agg)
    elif fld == "epsilon":
        new_comp = replace(comp, epsilon=outcome)
    else:
        space = space_from_dict(outcome) if isinstance(outcome, dict) else outcome
        # the current value must stay meaningful under the new metric
        new_comp = replace(comp, space=space)
    new_value = new_comp.value if fld is None else {
        "sigma": new_comp.sigma, "phi": new_comp.aggregator, "space": new_comp.space, "epsilon": new_comp.epsilon
    }[fld]
    comps = tuple((n, new_comp if n == name else c) for n, c in constitution.components)
    return replace(constitution, components=comps, log=constitution.log + (AmendmentRecord(cid, old, new_value, trace),))


def amend_threshold(constitution: Constitution, name: str, votes: Sequence, mode: str = "voted",
                    trace: str | None = None) -> Constitution:
    """Apply the h-rule to the threshold of component ``name``."""
    current = constitution.component(name).sigma
    return amend_component(constitution, f"sigma.{name}", h_rule(current, votes, mode), trace)


def replay(initial: Constitution, log: Sequence[AmendmentRecord], upto: int | None = None) -> Constitution:
    """Rebuild the constitution after the first ``upto`` amendments of ``log``."""
    out = initial
    for rec in list(log)[: len(log) if upto is None else upto]:
        out = amend_component(out, rec.component, rec.new, rec.trace)
    return out


def history(initial: Constitution, final: Constitution) -> list[Constitution]:
    """Every version from ``initial`` to ``final``."""
    new = final.log[len(initial.log):]
    out = [initial]
    for rec in new:
        out.append(amend_component(out[-1], rec.component, rec.new, rec.trace))
    return out


def encode_value(constitution: Constitution, cid: str, value):
    if cid == "membership":
        return sorted(value, key=str)
    fld, name = _split(cid)
    if fld is None:
        return constitution.component(name).space.encode_point(value)
    if fld == "sigma":
        return str(value)
    if fld == "epsilon":
        return _num(value)
    return value.to_dict()


def log_lines(before: Constitution, after: Constitution) -> str:
    """Amendments of ``after`` beyond ``before`` as JSON lines."""
    lines = []
    state = before
    for rec in after.log[len(before.log):]:
        row = {
            "component": rec.component,
            "old": encode_value(state, rec.component, rec.old),
            "new": encode_value(state, rec.component, rec.new),
            "trace": rec.trace,
        }
        lines.append(json.dumps(row, sort_keys=True, ensure_ascii=False))
        state = amend_component(state, rec.component, rec.new, rec.trace)
    return "".join(line + "\n" for line in lines)


__all__ = [
    "AmendmentRecord",
    "Component",
    "Constitution",
    "UnknownComponent",
    "amend_component",
    "amend_threshold",
    "classify_component",
    "h_rule",
    "history",
    "log_lines",
    "membership_referendum",
    "replay",
]
