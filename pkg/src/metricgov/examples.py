"""Configuration documents and the bundled worked-example fixtures.

A configuration document is JSON. Epoch documents look like::

    {"space": {"kind": "scalar"}, "status_quo": 20,
     "aggregator": {"kind": "median", "sigma": "1/2"},
     "votes": [10, 15, 18, 22, 25],
     "sources": [{"kind": "geometric-median"}]}

Fixture documents add a ``kind`` (``epoch``, ``rounds``, ``gap``, ``hrule``)
and an ``expect`` block checked by ``verify_fixture``.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from .amendments import h_rule
from .gap import GeometricMedianSource, HeuristicPSource, compromise_gap, geometric_median
from .protocol import Action, EpochConfig, EpochOutcome, ScriptedSource, replay_trace, run_epoch
from .rule import aggregator_from_dict, as_fraction, round_winner, utility_vector
from .sim import RandomSource
from .spaces import MetricSpace, Simplex, space_from_dict

FIXTURE_DIR = Path(__file__).with_name("fixtures")
DEFAULT_TOL = 1e-9


class ConfigError(ValueError):
    """A configuration document is malformed or inconsistent."""


def load_document(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None


def _fraction(raw):
    return Fraction(raw) if isinstance(raw, str) else raw


def epoch_config(doc: dict) -> tuple[EpochConfig, list]:
    """Build the epoch config and decoded votes of a document."""
    try:
        space = space_from_dict(doc["space"])
        agg = aggregator_from_dict(doc.get("aggregator", "median"))
        sq = space.decode_point(doc["status_quo"])
        votes = [space.decode_point(v) for v in doc["votes"]]
        sigma = doc.get("sigma")
        cfg = EpochConfig(
            space,
            sq,
            agg,
            None if sigma is None else as_fraction(sigma),
            _fraction(doc.get("epsilon")),
            doc.get("max_rounds"),
        )
    except KeyError as exc:
        raise ConfigError(f"missing key {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if not votes:
        raise ConfigError("empty vote profile")
    return cfg, votes


def build_sources(specs: list, space: MetricSpace, seed: int | None = None) -> list:
    out = []
    for spec in specs:
        kind = spec.get("kind")
        if kind == "geometric-median":
            out.append(GeometricMedianSource())
        elif kind == "heuristic-p":
            out.append(HeuristicPSource(int(spec.get("cap", 8))))
        elif kind == "random":
            s = spec.get("seed", seed)
            if s is None:
                raise ConfigError("a random source needs a seed (config or --seed)")
            out.append(RandomSource(int(s), int(spec.get("per_round", 3)), spec.get("near", 0.5)))
        elif kind == "scripted":
            rounds = {
                int(r): [Action(int(a["member"]), space.decode_point(a["point"]) if "point" in a else None,
                                a.get("kind", "submit")) for a in acts]
                for r, acts in spec.get("rounds", {}).items()
            }
            out.append(ScriptedSource(rounds))
        else:
            raise ConfigError(f"unknown source kind {kind!r}")
    return out


def run_document(doc: dict, seed: int | None = None) -> tuple[EpochConfig, EpochOutcome]:
    cfg, votes = epoch_config(doc)
    sources = build_sources(doc.get("sources", []), cfg.space, seed)
    return cfg, run_epoch(cfg, votes, sources)


# ---------------------------------------------------------------------------
# fixture checks


@dataclass
class Check:
    label: str
    ok: bool
    detail: str = ""


@dataclass
class FixtureReport:
    name: str
    description: str
    checks: list[Check] = field(default_factory=list)
    seconds: float = 0.0
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.ok for c in self.checks)

    def add(self, label: str, ok: bool, detail: str = "") -> None:
        self.checks.append(Check(label, bool(ok), detail))


def _close(a, b, tol) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return abs(float(a) - float(b)) <= tol


def _points_equal(space: MetricSpace, a, b, tol) -> bool:
    if a is None or b is None:
        return a is None and b is None
    if space.exact:
        return a == b
    return space.distance(a, b) <= tol


def _check_epoch(doc: dict, rep: FixtureReport) -> None:
    cfg, outcome = run_document(doc)
    space, exp, tol = cfg.space, doc["expect"], doc.get("tol", DEFAULT_TOL)
    first = outcome.state.history[0]
    if "round1_scores" in exp:
        got = [e.score for e in first.scores]
        want = [_fraction(x) for x in exp["round1_scores"]]
        ok = len(got) == len(want) and all(_close(g, w, tol) for g, w in zip(got, want))
        rep.add("round-1 scores", ok, f"got {[float(g) for g in got]}")
    if "round1_winner" in exp:
        want = exp["round1_winner"]
        got = space.encode_point(first.winner) if first.has_winner else None
        rep.add("round-1 winner", got == want, f"got {got}")
    if "outcome" in exp:
        want = space.decode_point(exp["outcome"])
        rep.add("outcome", _points_equal(space, outcome.outcome, want, tol),
                f"got {space.encode_point(outcome.outcome)}")
    if "rounds" in exp:
        rep.add("rounds", outcome.rounds == exp["rounds"], f"got {outcome.rounds}")
    if exp.get("outcome_is_geometric_median"):
        gm = geometric_median(list(outcome.state.votes))
        if isinstance(space, Simplex):
            gm = Simplex.normalize(gm)
        rep.add("outcome is the geometric median", _points_equal(space, outcome.outcome, gm, 1e-6),
                f"outcome {space.encode_point(outcome.outcome)}, median {space.encode_point(gm)}")
    if exp.get("winner_beats_peaks"):
        last = outcome.state.history[-1]
        peaks = [last.score_of(v).score for v in outcome.state.votes]
        ok = last.has_winner and all(last.winning_score > p for p in peaks)
        rep.add("winner scores above every peak", ok,
                f"winner {last.winning_score}, best peak {max(peaks)}")
    if "cg" in exp:
        want, cg_tol = exp["cg"]
        report = compromise_gap(space, list(outcome.state.votes), cfg.status_quo, cfg.aggregator)
        rep.add("compromise gap", _close(report.cg, want, cg_tol), f"got {report.cg:.4f}")
    problems = replay_trace(outcome.trace, cfg)
    rep.add("trace replays", not problems, "; ".join(problems[:3]))


def _check_rounds(doc: dict, rep: FixtureReport) -> None:
    space = space_from_dict(doc["space"])
    agg = aggregator_from_dict(doc.get("aggregator", "median"))
    s = space.decode_point(doc["status_quo"])
    tol = doc.get("tol", DEFAULT_TOL)
    for case in doc["cases"]:
        label = case.get("label", "case")
        votes = [space.decode_point(v) for v in case["votes"]]
        props = [space.decode_point(p) for p in case.get("proposals", case["votes"])]
        res = round_winner(space, s, votes, props, agg)
        exp = case["expect"]
        if "winner" in exp:
            got = space.encode_point(res.winner) if res.has_winner else None
            rep.add(f"{label}: winner", got == exp["winner"], f"got {got}")
        for key, want in exp.get("scores", {}).items():
            p = space.decode_point(json.loads(key))
            got = res.score_of(p).score if p in props else agg(utility_vector(space, s, votes, p))
            rep.add(f"{label}: score of {key}", _close(got, _fraction(want), tol), f"got {float(got):.6g}")
        for key, want in exp.get("utilities", {}).items():
            p = space.decode_point(json.loads(key))
            got = utility_vector(space, s, votes, p)
            ok = len(got) == len(want) and all(_close(g, _fraction(w), tol) for g, w in zip(got, want))
            rep.add(f"{label}: utilities of {key}", ok, f"got {[round(float(g), 6) for g in got]}")


def _check_gap(doc: dict, rep: FixtureReport) -> None:
    space = space_from_dict(doc["space"])
    agg = aggregator_from_dict(doc.get("aggregator", "median"))
    s = space.decode_point(doc["status_quo"])
    votes = [space.decode_point(v) for v in doc["votes"]]
    exp, tol = doc["expect"], doc.get("tol", DEFAULT_TOL)
    report = compromise_gap(space, votes, s, agg)
    for key in ("opt", "peak", "cg", "lipschitz_bound", "heuristic_score"):
        if key in exp:
            got = getattr(report, {"opt": "opt_value", "peak": "peak_value"}.get(key, key))
            rep.add(key, _close(got, _fraction(exp[key]), tol), f"got {None if got is None else round(float(got), 6)}")
    if "opt_point" in exp:
        want = space.decode_point(exp["opt_point"])
        rep.add("opt point", _points_equal(space, report.opt_point, want, tol),
                f"got {space.encode_point(report.opt_point)}")
    if "proposal" in exp:
        c = space.decode_point(exp["proposal"]["point"])
        score = agg(utility_vector(space, s, votes, c))
        rep.add("proposal score", _close(score, exp["proposal"]["score"], tol), f"got {float(score):.4f}")


def _check_hrule(doc: dict, rep: FixtureReport) -> None:
    sigma, votes = doc["sigma"], doc["votes"]
    for mode, want in doc["expect"].items():
        got = h_rule(sigma, votes, mode)
        rep.add(f"{mode} mode", got == Fraction(want), f"got {got}")


CHECKS = {"epoch": _check_epoch, "rounds": _check_rounds, "gap": _check_gap, "hrule": _check_hrule}


def verify_fixture(doc: dict) -> FixtureReport:
    rep = FixtureReport(doc.get("name", "?"), doc.get("description", ""))
    t0 = time.perf_counter()
    try:
        CHECKS[doc["kind"]](doc, rep)
    except Exception as exc:  # reported as a failing fixture, not a crash
        rep.error = f"{type(exc).__name__}: {exc}"
    rep.seconds = time.perf_counter() - t0
    return rep


def fixture_paths() -> list[Path]:
    return sorted(FIXTURE_DIR.glob("*.json"))


def load_fixtures() -> list[dict]:
    docs = [load_document(p) for p in fixture_paths()]
    return sorted(docs, key=lambda d: (d.get("order", math.inf), d.get("name", "")))


def verify_all(docs: list[dict] | None = None) -> list[FixtureReport]:
    return [verify_fixture(d) for d in (load_fixtures() if docs is None else docs)]


def format_reports(reports: list[FixtureReport]) -> str:
    width = max((len(r.name) for r in reports), default=4)
    lines = []
    for r in reports:
        lines.append(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.seconds:6.3f}s  {r.description}")
        if r.error:
            lines.append(f"      error: {r.error}")
        for c in r.checks:
            if not c.ok:
                lines.append(f"      mismatch: {c.label} ({c.detail})")
    passed = sum(r.passed for r in reports)
    lines.append(f"{passed}/{len(reports)} fixtures passed")
    return "\n".join(lines)


def outcome_document(cfg: EpochConfig, outcome: EpochOutcome) -> dict[str, Any]:
    space = cfg.space
    return {
        "outcome": space.encode_point(outcome.outcome),
        "winner": None if outcome.winner is None else space.encode_point(outcome.winner),
        "rounds": outcome.rounds,
        "status_quo": space.encode_point(cfg.status_quo),
    }
