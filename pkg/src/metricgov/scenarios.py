"""Strategic-behaviour experiments run as batch trials.

Each scenario returns a ``ScenarioResult`` with its trial count and any
counterexamples found. The randomized searches work on distance matrices over
a small pool of sampled points so that whole batches are checked with numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .protocol import EpochConfig, run_epoch
from .rule import GeneralisedMedian, round_winner, support_threshold, utility, utility_vector
from .sim import sample_point
from .spaces import (
    Euclidean,
    FiniteTable,
    MetricSpace,
    Permutations,
    Plurality,
    Scalar1D,
    Simplex,
    Strings,
    Subsets,
)

SIGMAS = (Fraction(1, 2), Fraction(3, 5), Fraction(2, 3), Fraction(3, 4))


@dataclass
class ScenarioResult:
    name: str
    trials: int = 0
    failures: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "trials": self.trials,
            "failures": [str(f) for f in self.failures[:10]],
            "details": self.details,
        }


def random_table(rng: np.random.Generator, size: int = 8) -> FiniteTable:
    """Shortest-path metric of a random connected weighted graph."""
    labels = [f"t{i}" for i in range(size)]
    edges = [(labels[i], labels[int(rng.integers(i))], float(rng.integers(1, 6))) for i in range(1, size)]
    for _ in range(size):
        a, b = rng.choice(size, 2, replace=False)
        edges.append((labels[a], labels[b], float(rng.integers(1, 6))))
    return FiniteTable.from_edges(labels, edges)


def scenario_spaces(rng: np.random.Generator) -> dict[str, MetricSpace]:
    """One representative space per kind."""
    return {
        "plurality": Plurality(("alice", "bob", "carol")),
        "scalar": Scalar1D(0, 1),
        "euclidean": Euclidean(2),
        "simplex": Simplex(3),
        "permutations": Permutations(4),
        "subsets": Subsets(("a", "b", "c", "d", "e")),
        "strings": Strings("abc", 4),
        "table": random_table(rng),
    }


# ---------------------------------------------------------------------------
# (a) separating epoch


def separating_profile(space: MetricSpace, s, v_true, v_mis, n: int, sincere: bool) -> list:
    """Member 0's report plus ``k-1`` copies of each ideal and the rest at ``s``."""
    k = math.ceil(n / 2)
    rest = n - 2 * k + 1
    return [v_true if sincere else v_mis] + [v_true] * (k - 1) + [v_mis] * (k - 1) + [s] * rest


def separating_epoch(rng: np.random.Generator, trials: int = 1000) -> ScenarioResult:
    res = ScenarioResult("separating-epoch")
    spaces = scenario_spaces(rng)
    for kind, space in spaces.items():
        done = 0
        while done < trials:
            s = sample_point(space, rng)
            v_true = sample_point(space, rng)
            v_mis = sample_point(space, rng) if rng.random() > 0.1 else s
            if space.distance(v_true, s) == 0 or space.distance(v_true, v_mis) == 0:
                continue
            n = int(rng.integers(1, 10))
            cfg = EpochConfig(space, s, GeneralisedMedian())
            good = run_epoch(cfg, separating_profile(space, s, v_true, v_mis, n, True)).outcome
            bad = run_epoch(cfg, separating_profile(space, s, v_true, v_mis, n, False)).outcome
            u_good = utility(space, s, v_true, good)
            u_bad = utility(space, s, v_true, bad)
            expect_good = space.distance(v_true, s)
            expect_bad = 0 if space.distance(v_mis, s) == 0 else expect_good - space.distance(v_true, v_mis)
            at_s = sum(1 for v in separating_profile(space, s, v_true, v_mis, n, True)[1:] if v == s)
            if not u_good > u_bad:
                res.failures.append((kind, n, v_true, v_mis, s))
            elif not (math.isclose(u_good, expect_good, abs_tol=1e-9) and math.isclose(u_bad, expect_bad, abs_tol=1e-9)):
                res.failures.append((kind, n, "case analysis", u_good, u_bad))
            elif at_s != (1 if n % 2 == 0 else 0) and v_mis != s:
                res.failures.append((kind, n, "voters at s", at_s))
            done += 1
        res.trials += done
    res.details["kinds"] = sorted(spaces)
    return res


# ---------------------------------------------------------------------------
# (b) two-dimensional manipulation


def multidim_not_sp() -> ScenarioResult:
    res = ScenarioResult("multidim-not-sp", trials=1)
    space, s = Euclidean(2), (0.0, 0.0)
    truth = [(1.0, 0.0), (0.0, 1.0), (-1.0, -1.0)]
    mis = (0.5, 0.5)
    sincere = round_winner(space, s, truth, truth, GeneralisedMedian())
    reported = [mis] + truth[1:]
    manipulated = round_winner(space, s, reported, reported, GeneralisedMedian())
    entry = manipulated.score_of(mis)
    gain = utility(space, s, truth[0], mis)
    res.details = {
        "sincere_winner": sincere.winner,
        "manipulated_winner": manipulated.winner,
        "utilities": [round(u, 6) for u in entry.utilities],
        "median": entry.score,
        "true_gain": gain,
    }
    if sincere.has_winner:
        res.failures.append("sincere profile should retain the status quo")
    if manipulated.winner != mis or not gain > 0:
        res.failures.append("misreport should win and benefit member 1")
    return res


# ---------------------------------------------------------------------------
# (c) exhaustive misreport search on a scalar grid


def _scalar_winners(votes: np.ndarray, s: float, k: int) -> np.ndarray:
    """Round winner (index into each row) for a batch of scalar profiles, -1 when none."""
    # votes: (B, n); proposals are the votes themselves
    ds = np.abs(votes - s)
    U = ds[:, None, :] - np.abs(votes[:, None, :] - votes[:, :, None])  # (B, proposal, voter)
    score = -np.partition(-U, k - 1, axis=2)[:, :, k - 1]
    support = (U > 0).sum(axis=2) >= k
    score = np.where(support & (score > 0), score, -np.inf)
    best = score.max(axis=1, keepdims=True)
    # ties go to the smallest value
    cand = np.where(score == best, votes, np.inf)
    win = np.argmin(cand, axis=1)
    return np.where(np.isfinite(best[:, 0]), win, -1)


def scalar_misreport(rng: np.random.Generator, profiles: int = 300, grid: int = 21, max_n: int = 7) -> ScenarioResult:
    res = ScenarioResult("scalar-misreport")
    points = np.arange(grid, dtype=float)
    space = Scalar1D(0, grid - 1)
    checked = 0
    profitable: dict[str, int] = {}
    for sigma in SIGMAS:
        for n in range(1, max_n + 1):
            k = support_threshold(sigma, n)
            for _ in range(profiles):
                s = float(rng.integers(grid))
                truth = rng.integers(grid, size=n).astype(float)
                for i in range(n):
                    batch = np.repeat(truth[None, :], grid, axis=0)
                    batch[:, i] = points
                    win = _scalar_winners(batch, s, k)
                    outcome = np.where(win >= 0, batch[np.arange(grid), np.maximum(win, 0)], s)
                    u = np.abs(truth[i] - s) - np.abs(truth[i] - outcome)
                    honest = u[int(truth[i])]
                    if (u > honest + 1e-12).any():
                        key = f"sigma={sigma},n={n}"
                        profitable[key] = profitable.get(key, 0) + 1
                        if len(res.failures) < 50:
                            res.failures.append((str(sigma), n, s, truth.tolist(), i, float(points[np.argmax(u)])))
                    checked += grid
            # spot-check the vectorised rule against the reference one
            truth = [int(x) for x in rng.integers(grid, size=n)]
            s = int(rng.integers(grid))
            ref = round_winner(space, s, truth, truth, GeneralisedMedian(sigma))
            w = _scalar_winners(np.asarray([truth], dtype=float), float(s), k)[0]
            if (w < 0) != (not ref.has_winner) or (w >= 0 and truth[w] != ref.winner):
                res.failures.append(("reference mismatch", str(sigma), truth, s))
    res.trials = checked
    res.details = {"profitable_by_setting": profitable}
    return res


# ---------------------------------------------------------------------------
# (d) randomized search over utility structure


class _Pool:
    """Sampled points with their full distance matrix, in canonical order."""

    def __init__(self, space: MetricSpace, rng: np.random.Generator, size: int = 40):
        pts = space.sorted(sample_point(space, rng) for _ in range(size))
        self.points = pts
        self.D = space.cross(space.to_array(pts), space.to_array(pts))

    def u(self, v, p, s):
        return self.D[v, s] - self.D[v, p]


def _kth(U: np.ndarray, k: int) -> np.ndarray:
    return -np.partition(-U, k - 1, axis=-1)[..., k - 1]


TOL = 1e-9


def _lemma_batch(pool: _Pool, rng: np.random.Generator, B: int, n: int, sigma) -> dict[str, tuple[int, int]]:
    """Check one batch of every lemma; return (counterexamples, trials meeting the hypothesis)."""
    P = len(pool.points)
    k = support_threshold(sigma, n)
    D = pool.D
    s = rng.integers(P, size=B)
    V = rng.integers(P, size=(B, n))
    mis = rng.integers(P, size=B)

    def util(voters, props):
        # voters (B, n) indices, props (B,) indices -> (B, n)
        return D[voters, s[:, None]] - D[voters, props[:, None]]

    def positive(U):
        return U > TOL

    found = {}
    Vm = V.copy()
    Vm[:, 0] = mis

    # flip-unsupported
    W = rng.integers(P, size=B)
    Us, Um = util(V, W), util(Vm, W)
    flip = (positive(Us).sum(1) < k) & (positive(Um).sum(1) >= k)
    found["flip-unsupported"] = (int((flip & (Us[:, 0] > TOL)).sum()), int(flip.sum()))

    # compromise-replicates: c != s liked by member 0
    c = rng.integers(P, size=B)
    Uc = util(V, c)
    Vc = V.copy()
    Vc[:, 0] = c
    Ucm = util(Vc, c)
    pre = (D[c, s] > TOL) & (Uc[:, 0] > TOL)
    same = (positive(Uc).sum(1) >= k) == (positive(Ucm).sum(1) >= k)
    found["compromise-replicates"] = (int((pre & ~same).sum()), int(pre.sum()))

    # winner-swap
    W0, W1 = rng.integers(P, size=B), rng.integers(P, size=B)
    A0, A1 = util(V, W0), util(V, W1)
    M0, M1 = util(Vm, W0), util(Vm, W1)
    f0, f1, g0, g1 = _kth(A0, k), _kth(A1, k), _kth(M0, k), _kth(M1, k)
    sup = (positive(A0).sum(1) >= k) & (positive(A1).sum(1) >= k)
    cond = sup & (f0 > f1 + TOL) & (f1 > TOL) & (g0 < f0 - TOL) & (g1 > f1 + TOL)
    found["winner-swap"] = (int((cond & ~(A0[:, 0] > A1[:, 0])).sum()), int(cond.sum()))

    # coalition-compromise: extra public proposals from a coalition
    m = int(rng.integers(1, n + 1))
    extra = rng.integers(P, size=(B, m))
    props = np.concatenate([V, extra], axis=1)
    Uall = D[V[:, None, :], s[:, None, None]] - D[V[:, None, :], props[:, :, None]]  # (B, prop, voter)
    score = _kth(Uall, k)
    ok = (positive(Uall).sum(2) >= k) & (score > TOL)
    masked = np.where(ok, score, -np.inf)

    def winner(cols):
        sub = masked[:, :cols]
        best = sub.max(1, keepdims=True)
        cand = np.where(sub >= best - TOL, props[:, :cols], P + 1)
        w = cand.min(1)
        return np.where(np.isfinite(best[:, 0]), w, -1)

    before, after = winner(n), winner(n + m)
    allowed = (after == before) | (after[:, None] == extra).any(1)
    found["compromise-beneficial"] = (int((~allowed).sum()), int((after != before).sum()))
    # a submitter whose entry is not preferred to the old winner is never helped by it winning
    old_u = np.where(before[:, None] >= 0, D[V[:, :m], s[:, None]] - D[V[:, :m], np.maximum(before, 0)[:, None]], 0.0)
    sub_u = D[V[:, :m], s[:, None]] - D[V[:, :m], extra]
    new_u = np.where(after[:, None] >= 0, D[V[:, :m], s[:, None]] - D[V[:, :m], np.maximum(after, 0)[:, None]], 0.0)
    won_own = (after[:, None] == extra) & (after[:, None] != before[:, None])
    harmful = won_own & (sub_u <= old_u + TOL) & (new_u > old_u + TOL)
    found["coalition-compromise"] = (int(harmful.any(1).sum()), int(won_own.any(1).sum()))

    # coalition-flip: the first m members misreport
    Vt = V.copy()
    Vt[:, :m] = rng.integers(P, size=(B, m))
    W = rng.integers(P, size=B)
    Us, Ut = util(V, W), util(Vt, W)
    flip = (positive(Us).sum(1) < k) & (positive(Ut).sum(1) >= k)
    all_like = (Us[:, :m] > TOL).all(1)
    found["coalition-flip"] = (int((flip & all_like).sum()), int(flip.sum()))
    return found


LEMMAS = (
    "flip-unsupported",
    "compromise-replicates",
    "winner-swap",
    "compromise-beneficial",
    "coalition-compromise",
    "coalition-flip",
)


def lemma_search(rng: np.random.Generator, trials: int = 100_000, batch: int = 5000) -> ScenarioResult:
    res = ScenarioResult("lemma-search")
    spaces = scenario_spaces(rng)
    counts = {name: 0 for name in LEMMAS}
    triggered = {name: 0 for name in LEMMAS}
    for kind, space in spaces.items():
        done = 0
        while done < trials:
            pool = _Pool(space, rng)
            n = int(rng.integers(1, 10))
            sigma = SIGMAS[int(rng.integers(len(SIGMAS)))]
            B = min(batch, trials - done)
            for name, (bad, hyp) in _lemma_batch(pool, rng, B, n, sigma).items():
                counts[name] += bad
                triggered[name] += hyp
                if bad:
                    res.failures.append((kind, name, bad))
            done += B
        res.trials += done
    res.details = {"per_kind_trials": trials, "counterexamples": counts, "hypothesis_met": triggered, "kinds": sorted(spaces)}
    return res


# ---------------------------------------------------------------------------
# (e) non-monotone table metric


def monotonicity_table() -> FiniteTable:
    labels = ["s", "w", "p", "v1", "v2", "v3", "v4", "v5"]
    edges = [("s", "w", 10), ("s", "p", 10), ("w", "p", 5)]
    to_w = (13, 12, 11, 9.99, 9.98)
    to_p = (16, 14, 12, 10.01, 9.9)
    for j in range(5):
        v = f"v{j + 1}"
        edges += [(v, "s", 10), (v, "w", to_w[j]), (v, "p", to_p[j])]
    return FiniteTable.from_edges(labels, edges)


def monotonicity_counterexample() -> ScenarioResult:
    res = ScenarioResult("monotonicity-counterexample", trials=1)
    space = monotonicity_table()
    before = ["v1", "v2", "v3", "v4", "v5", "p", "w"]
    after = ["v1", "v2", "v3", "w", "v5", "p", "w"]
    agg = GeneralisedMedian()
    r0 = round_winner(space, "s", before, before, agg)
    r1 = round_winner(space, "s", after, after, agg)
    med = {
        "before_w": agg(utility_vector(space, "s", before, "w")),
        "before_p": agg(utility_vector(space, "s", before, "p")),
        "after_w": agg(utility_vector(space, "s", after, "w")),
        "after_p": agg(utility_vector(space, "s", after, "p")),
    }
    res.details = {"before_winner": r0.winner, "after_winner": r1.winner, **{k: round(v, 9) for k, v in med.items()}}
    if r0.winner != "w" or r1.winner != "p":
        res.failures.append("w should win before and lose to p after member 4 moves to w")
    return res


# ---------------------------------------------------------------------------


def scenario_suite(seed: int, scale: float = 1.0) -> list[ScenarioResult]:
    """Run every scenario. ``scale`` shrinks the randomized budgets for quick runs."""
    rng = np.random.default_rng(seed)
    runs: list[tuple[str, Callable[[], ScenarioResult]]] = [
        ("a", lambda: separating_epoch(rng, max(1, int(1000 * scale)))),
        ("b", multidim_not_sp),
        ("c", lambda: scalar_misreport(rng, max(1, int(300 * scale)))),
        ("d", lambda: lemma_search(rng, max(1, int(100_000 * scale)))),
        ("e", monotonicity_counterexample),
    ]
    return [fn() for _, fn in runs]


__all__ = [
    "ScenarioResult",
    "lemma_search",
    "monotonicity_counterexample",
    "monotonicity_table",
    "multidim_not_sp",
    "scalar_misreport",
    "scenario_suite",
    "separating_epoch",
    "separating_profile",
]
