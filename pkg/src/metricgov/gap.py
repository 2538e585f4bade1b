"""Compromise gap: how much better the best point of the space is than the best peak.

Scoring is vectorised through ``space.cross`` so a whole grid or enumeration is
scored with one distance matrix.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .protocol import Action, EpochState, check_admissibility
from .rule import Aggregator, GeneralisedMedian, Mean, support_threshold, utility
from .spaces import (
    DEFAULT_CAP,
    Euclidean,
    MetricSpace,
    Scalar1D,
    Simplex,
    SpaceNotEnumerable,
    enumerated_array,
    midpoint_candidates,
)

GRID_POINTS = 101
REFINE_POINTS = 21
SIMPLEX_STEP = 50  # barycentric step 1/50
SIMPLEX_REFINE = 10
SCALAR_GRID = 2001
GM_TOL = 1e-10
GM_MAX_ITER = 10_000
SCORE_TOL = 1e-12


class MethodUnsupported(ValueError):
    pass


class NoConvergence(RuntimeError):
    pass


def aggregate_rows(agg: Aggregator, U: np.ndarray) -> np.ndarray:
    """Apply ``agg`` to every row of a utility matrix."""
    n = U.shape[1]
    if isinstance(agg, GeneralisedMedian):
        k = support_threshold(agg.sigma, n)
        return -np.partition(-U, k - 1, axis=1)[:, k - 1]
    if isinstance(agg, Mean):
        return U.mean(axis=1)
    raise TypeError(f"unsupported aggregator {agg!r}")


def score_array(space: MetricSpace, s, votes: Sequence, X: np.ndarray, agg: Aggregator) -> np.ndarray:
    """Aggregate score of each point in the array ``X`` (space representation)."""
    V = space.to_array(list(votes))
    ds = space.cross(V, space.to_array([s]))[:, 0]
    U = ds[None, :] - space.cross(X, V)
    return aggregate_rows(agg, U)


def score_points(space: MetricSpace, s, votes: Sequence, points: Sequence, agg: Aggregator) -> np.ndarray:
    if len(points) == 0:
        return np.empty(0)
    return score_array(space, s, votes, space.to_array(list(points)), agg)


# ---------------------------------------------------------------------------
# OPT


def _opt_enumeration(space, votes, s, agg):
    X = enumerated_array(space)
    f = score_array(space, s, votes, X, agg)
    i = int(np.argmax(f))
    return float(f[i]), space.from_array(X[i : i + 1])[0]


def _opt_closed_form_1d(space, votes, s, agg):
    if not isinstance(agg, GeneralisedMedian):
        raise MethodUnsupported("closed form needs the generalised median")
    n = len(votes)
    k = support_threshold(agg.sigma, n)
    order = sorted(votes)
    s = float(s)
    best, point = 0.0, s
    # rightward proposals are scored by the (n-k+1)-th smallest vote, leftward by the k-th
    right, left = order[n - k], order[k - 1]
    if float(right) - s > best:
        best, point = float(right) - s, right
    if s - float(left) > best:
        best, point = s - float(left), left
    return best, point


def _opt_grid_2d(space, votes, s, agg):
    V = np.asarray(votes, dtype=float)
    s_arr = np.asarray(s, dtype=float)
    lo, hi = V.min(axis=0), V.max(axis=0)
    pad = float(np.linalg.norm(np.clip(s_arr, lo, hi) - s_arr))
    lo, hi = lo - pad, hi + pad
    span = np.where(hi > lo, hi - lo, 1.0)
    g = np.linspace(0.0, 1.0, GRID_POINTS)
    X = np.stack(np.meshgrid(lo[0] + g * span[0], lo[1] + g * span[1]), axis=-1).reshape(-1, 2)
    f = score_array(space, s, votes, X, agg)
    i = int(np.argmax(f))
    best, x = float(f[i]), X[i]
    h = span / (GRID_POINTS - 1)
    g2 = np.linspace(-1.0, 1.0, REFINE_POINTS)
    X2 = np.stack(np.meshgrid(x[0] + g2 * h[0], x[1] + g2 * h[1]), axis=-1).reshape(-1, 2)
    f2 = score_array(space, s, votes, X2, agg)
    j = int(np.argmax(f2))
    if f2[j] > best:
        best, x = float(f2[j]), X2[j]
    return best, tuple(float(c) for c in x)


def _compositions(total: int, parts: int) -> np.ndarray:
    """All non-negative integer vectors of length ``parts`` summing to ``total``."""
    rows = []
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, row = -1, []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        row.append(total + parts - 2 - prev)
        rows.append(row)
    return np.asarray(rows, dtype=np.int64)


_COMPOSITION_CACHE: dict = {}


def _opt_grid_simplex(space, votes, s, agg):
    m = space.m
    if m > 4:
        raise MethodUnsupported("simplex grid search supports m <= 4")
    key = (SIMPLEX_STEP, m)
    if key not in _COMPOSITION_CACHE:
        _COMPOSITION_CACHE[key] = _compositions(SIMPLEX_STEP, m)
    counts = _COMPOSITION_CACHE[key]
    f = score_array(space, s, votes, counts / SIMPLEX_STEP, agg)
    i = int(np.argmax(f))
    best = float(f[i])
    # refine on the 10x finer lattice around the incumbent
    fine = SIMPLEX_STEP * SIMPLEX_REFINE
    base = counts[i] * SIMPLEX_REFINE
    r = range(-SIMPLEX_REFINE, SIMPLEX_REFINE + 1)
    deltas = np.asarray(list(itertools.product(r, repeat=m - 1)), dtype=np.int64)
    deltas = np.hstack([deltas, -deltas.sum(axis=1, keepdims=True)])
    cand = base[None, :] + deltas
    cand = cand[(cand >= 0).all(axis=1)]
    f2 = score_array(space, s, votes, cand / fine, agg)
    j = int(np.argmax(f2))
    x = counts[i] / SIMPLEX_STEP
    if f2[j] > best:
        best, x = float(f2[j]), cand[j] / fine
    return best, tuple(float(c) for c in x)


def _opt_grid_scalar(space, votes, s, agg):
    pts = [float(v) for v in votes] + [float(s)]
    lo, hi = min(pts), max(pts)
    X = np.linspace(lo, hi, SCALAR_GRID) if hi > lo else np.asarray([lo])
    f = score_array(space, s, votes, X, agg)
    i = int(np.argmax(f))
    return float(f[i]), float(X[i])


def default_method(space: MetricSpace, agg: Aggregator) -> str:
    if space.finite:
        return "enumeration"
    if isinstance(space, Scalar1D):
        return "closed-form-1D" if isinstance(agg, GeneralisedMedian) else "grid"
    return "grid"


def opt(space: MetricSpace, votes: Sequence, s, agg: Aggregator, method: str = "auto"):
    """``(value, point)`` maximising the aggregate score over the space."""
    if method == "auto":
        method = default_method(space, agg)
    if method == "enumeration":
        if not space.finite:
            raise SpaceNotEnumerable(f"{space.kind} space is not enumerable")
        return _opt_enumeration(space, votes, s, agg)
    if method == "closed-form-1D":
        if not isinstance(space, Scalar1D):
            raise MethodUnsupported("closed form applies to scalar spaces only")
        return _opt_closed_form_1d(space, votes, s, agg)
    if method == "grid":
        if isinstance(space, Simplex):
            return _opt_grid_simplex(space, votes, s, agg)
        if isinstance(space, Euclidean) and space.dim == 2:
            return _opt_grid_2d(space, votes, s, agg)
        if isinstance(space, Scalar1D):
            return _opt_grid_scalar(space, votes, s, agg)
        raise MethodUnsupported(f"no grid search for {space.kind}")
    raise MethodUnsupported(f"unknown method {method!r}")


def peak(votes: Sequence, s, space: MetricSpace, agg: Aggregator):
    """Best aggregate score among the votes themselves."""
    f = score_points(space, s, votes, votes, agg)
    i = int(np.argmax(f))
    return float(f[i]), votes[i]


def lipschitz_bound(space: MetricSpace, votes: Sequence, x_star) -> float:
    return min(float(space.distance(x_star, p)) for p in votes)


# ---------------------------------------------------------------------------
# Heuristic P


def _key(p):
    return tuple(p) if isinstance(p, list) else p


def pairwise_candidates(space: MetricSpace, proposals: Sequence, cap: int = DEFAULT_CAP) -> list:
    """Midpoint candidates of every pair of distinct proposals, deduplicated, in pair order."""
    uniq = list(dict.fromkeys(_key(p) for p in proposals))
    seen, out = set(), []
    for a, b in itertools.combinations(uniq, 2):
        for c in midpoint_candidates(space, a, b, cap):
            c = _key(c)
            if c not in seen:
                seen.add(c)
                out.append(c)
    return out


@dataclass(frozen=True)
class HeuristicResult:
    point: Any
    score: float | None
    best_candidate: Any
    best_candidate_score: float | None
    baseline: float
    candidates: int


def heuristic_search(space: MetricSpace, proposals: Sequence, s, agg: Aggregator, cap: int = DEFAULT_CAP,
                     votes: Sequence | None = None) -> HeuristicResult:
    """Pairwise-compromise search with its diagnostics."""
    votes = list(proposals) if votes is None else list(votes)
    proposals = list(dict.fromkeys(_key(p) for p in proposals))
    base = float(np.max(score_points(space, s, votes, proposals, agg)))
    cands = pairwise_candidates(space, proposals, cap)
    if not cands:
        return HeuristicResult(None, None, None, None, base, 0)
    f = score_points(space, s, votes, cands, agg)
    best = float(np.max(f))
    # ties among the best candidates go to the space's canonical order
    top = [c for c, v in zip(cands, f) if v >= best - SCORE_TOL * max(1.0, abs(best))]
    c_star = min(top, key=space.sort_key)
    tol = SCORE_TOL * max(1.0, abs(best), abs(base))
    if best > base + tol:
        return HeuristicResult(c_star, best, c_star, best, base, len(cands))
    return HeuristicResult(None, None, c_star, best, base, len(cands))


def heuristic_p(space: MetricSpace, proposals: Sequence, s, agg: Aggregator, cap: int = DEFAULT_CAP,
                votes: Sequence | None = None):
    """Best pairwise midpoint if it strictly beats every proposal, else ``None``.

    ``votes`` defaults to ``proposals``, which is the first-round situation
    where the proposal set is exactly the profile.
    """
    return heuristic_search(space, proposals, s, agg, cap, votes).point


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class GapReport:
    opt_value: float
    opt_point: Any
    opt_method: str
    peak_value: float
    peak_point: Any
    cg: float
    lipschitz_bound: float
    heuristic_result: Any
    heuristic_score: float | None
    vacuous: bool

    @property
    def exact(self) -> bool:
        return self.opt_method in ("enumeration", "closed-form-1D")

    def to_dict(self, space: MetricSpace) -> dict:
        enc = space.encode_point
        return {
            "opt": self.opt_value,
            "opt_point": enc(self.opt_point),
            "opt_method": self.opt_method,
            "peak": self.peak_value,
            "peak_point": enc(self.peak_point),
            "cg": self.cg,
            "lipschitz_bound": self.lipschitz_bound,
            "heuristic": None if self.heuristic_result is None else enc(self.heuristic_result),
            "heuristic_score": self.heuristic_score,
            "vacuous": self.vacuous,
        }


def compromise_gap(space: MetricSpace, votes: Sequence, s, agg: Aggregator, method: str = "auto",
                   cap: int = DEFAULT_CAP) -> GapReport:
    if method == "auto":
        method = default_method(space, agg)
    votes = [_key(v) for v in votes]
    opt_value, opt_point = opt(space, votes, s, agg, method)
    peak_value, peak_point = peak(votes, s, space, agg)
    search = heuristic_search(space, votes, s, agg, cap)
    if method == "grid":
        # a grid can miss a peak or midpoint it should dominate; the sup covers them too
        if peak_value > opt_value:
            opt_value, opt_point = peak_value, peak_point
        if search.best_candidate is not None and search.best_candidate_score > opt_value:
            opt_value, opt_point = search.best_candidate_score, search.best_candidate
    cg = opt_value - peak_value
    if abs(cg) <= SCORE_TOL * max(1.0, abs(opt_value)):
        cg = 0.0
    return GapReport(
        opt_value=opt_value,
        opt_point=opt_point,
        opt_method=method,
        peak_value=peak_value,
        peak_point=peak_point,
        cg=cg,
        lipschitz_bound=lipschitz_bound(space, votes, opt_point),
        heuristic_result=search.point,
        heuristic_score=search.score,
        vacuous=opt_value <= SCORE_TOL,
    )


# ---------------------------------------------------------------------------
# geometric median


def geometric_median(points: Sequence, tolerance: float = GM_TOL, max_iter: int = GM_MAX_ITER) -> tuple:
    """Minimiser of the summed Euclidean distance to ``points``.

    Weiszfeld iteration from the centroid, with the Vardi-Zhang correction when
    an iterate lands on an input point.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("need a non-empty list of equal-length vectors")
    y = X.mean(axis=0)
    if np.allclose(X, X[0], rtol=0, atol=tolerance):
        return tuple(float(c) for c in X[0])
    for _ in range(max_iter):
        diff = X - y
        dist = np.linalg.norm(diff, axis=1)
        hit = dist < tolerance
        w = 1.0 / np.where(hit, 1.0, dist)
        w[hit] = 0.0
        t = (X * w[:, None]).sum(axis=0) / w.sum()
        eta = int(hit.sum())
        if eta:
            r = np.linalg.norm((diff * w[:, None]).sum(axis=0))
            if r <= eta:
                # the coinciding input point is itself optimal
                return tuple(float(c) for c in y)
            gamma = eta / r
            y_new = (1 - gamma) * t + gamma * y
        else:
            y_new = t
        if np.linalg.norm(y_new - y) < tolerance:
            return tuple(float(c) for c in y_new)
        y = y_new
    raise NoConvergence(f"geometric median did not converge in {max_iter} iterations")


# ---------------------------------------------------------------------------
# proposal sources


def _attribute(state: EpochState, c) -> Action:
    """Pick the first member who can propose ``c``; fall back to one whose attempt gets logged."""
    space, s = state.space, state.config.status_quo
    for i in range(state.n):
        kind = "update" if i in state.current_public else "submit"
        if check_admissibility(state, i, c, replacing=(kind == "update")) is None:
            return Action(i, c, kind)
    for i in range(state.n):
        if i not in state.current_public and utility(space, s, state.votes[i], c) > 0:
            return Action(i, c, "submit")
    free = [i for i in range(state.n) if i not in state.current_public]
    return Action(free[0] if free else 0, c, "submit")


class GeometricMedianSource:
    """Submits the geometric median of the votes once, after the voting round."""

    def __init__(self, tolerance: float = GM_TOL):
        self.tolerance = tolerance
        self.done = False

    def propose(self, state: EpochState):
        if self.done:
            return []
        self.done = True
        c = geometric_median(state.votes, self.tolerance)
        if isinstance(state.space, Simplex):
            c = Simplex.normalize(c)
        return [_attribute(state, c)]


class HeuristicPSource:
    """Submits the pairwise-compromise candidate whenever it beats the current proposals."""

    def __init__(self, cap: int = DEFAULT_CAP):
        self.cap = cap

    def propose(self, state: EpochState):
        cfg = state.config
        c = heuristic_p(cfg.space, state.proposal_set(), cfg.status_quo, cfg.aggregator, self.cap, state.votes)
        if c is None:
            return []
        return [_attribute(state, c)]


__all__ = [
    "GapReport",
    "GeometricMedianSource",
    "HeuristicPSource",
    "MethodUnsupported",
    "NoConvergence",
    "compromise_gap",
    "geometric_median",
    "heuristic_p",
    "heuristic_search",
    "lipschitz_bound",
    "opt",
    "peak",
    "score_points",
]
