"""Random profiles and the seeded compromise-gap sweep."""

from __future__ import annotations

import csv
import io
import json
import zlib
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .gap import compromise_gap
from .protocol import Action, EpochState
from .rule import GeneralisedMedian, check_sigma, utility
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
    VACANT,
)

CSV_COLUMNS = ("setting", "n", "profiles", "positive_cg_freq", "gap_closing_ratio", "hit_rate")
SETTINGS = ("euclid2d", "simplex", "hypercube", "permutations")
STATUS_QUO_POLICIES = ("same-distribution",)
MAX_RESAMPLES = 10_000
CG_TOL = 1e-9


def setting_space(setting: str, size: int | None = None) -> MetricSpace:
    if setting == "euclid2d":
        return Euclidean(2)
    if setting == "simplex":
        return Simplex(size or 3)
    if setting == "hypercube":
        return Subsets(tuple(f"a{i}" for i in range(size or 6)))
    if setting == "permutations":
        return Permutations(size or 4)
    raise ValueError(f"unknown setting {setting!r}")


def setting_label(setting: str, size: int | None = None) -> str:
    if setting == "euclid2d":
        return "2D Euclidean"
    if setting == "simplex":
        return f"Simplex (m={size})"
    if setting == "hypercube":
        return f"Hypercube (|A|={size})"
    if setting == "permutations":
        return f"Permutations (m={size})"
    raise ValueError(f"unknown setting {setting!r}")


def sample_point(space: MetricSpace, rng: np.random.Generator):
    """One point drawn uniformly from the space (unit box for unbounded real spaces)."""
    if isinstance(space, Simplex):
        return tuple(float(x) for x in rng.dirichlet(np.ones(space.m)))
    if isinstance(space, Euclidean):
        return tuple(float(x) for x in rng.random(space.dim))
    if isinstance(space, Scalar1D):
        lo = 0.0 if space.low is None else float(space.low)
        hi = lo + 1.0 if space.high is None else float(space.high)
        return float(rng.uniform(lo, hi))
    if isinstance(space, Subsets):
        k = len(space.ground)
        if space.size is None:
            mask = int(rng.integers(0, 1 << k))
            return space.unmask(mask)
        picks = rng.choice(k, size=space.size, replace=False)
        return frozenset(space.ground[int(i)] for i in picks)
    if isinstance(space, Permutations):
        return tuple(int(i) for i in rng.permutation(space.m))
    if isinstance(space, Plurality):
        options = (VACANT,) + space.candidates
        return options[int(rng.integers(len(options)))]
    if isinstance(space, FiniteTable):
        return space.labels[int(rng.integers(len(space.labels)))]
    if isinstance(space, Strings):
        length = int(rng.integers(0, space.max_length + 1))
        return "".join(space.alphabet[int(i)] for i in rng.integers(0, len(space.alphabet), length))
    raise TypeError(f"cannot sample from {space.kind}")


def sample_profile(space: MetricSpace, n: int, rng: np.random.Generator, policy: str = "same-distribution"):
    """``n`` peaks and a status quo drawn independently from the same distribution."""
    if policy not in STATUS_QUO_POLICIES:
        raise ValueError(f"unknown status-quo policy {policy!r}")
    votes = [sample_point(space, rng) for _ in range(n)]
    return votes, sample_point(space, rng)


def evaluate_profile(space: MetricSpace, votes: Sequence, s, sigma=Fraction(1, 2), cap: int = 8) -> dict:
    rep = compromise_gap(space, votes, s, GeneralisedMedian(sigma), cap=cap)
    positive = rep.cg > CG_TOL * max(1.0, abs(rep.opt_value))
    hit = rep.heuristic_result is not None
    closing = None
    if positive and hit:
        closing = (rep.heuristic_score - rep.peak_value) / rep.cg
    return {
        "opt": rep.opt_value,
        "peak": rep.peak_value,
        "cg": rep.cg,
        "opt_method": rep.opt_method,
        "lipschitz_bound": rep.lipschitz_bound,
        "heuristic_score": rep.heuristic_score,
        "hit": hit,
        "positive_cg": positive,
        "gap_closing": closing,
        "vacuous": rep.vacuous,
    }


@dataclass(frozen=True)
class SweepConfig:
    setting: str
    n: int
    size: int | None = None
    profiles: int = 300
    sigma: Any = Fraction(1, 2)
    seed: int = 0
    status_quo: str = "same-distribution"
    cap: int = 8

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}")
        if self.profiles < 1 or self.n < 1:
            raise ValueError("profiles and n must be positive")
        if self.status_quo not in STATUS_QUO_POLICIES:
            raise ValueError(f"unknown status-quo policy {self.status_quo!r}")
        object.__setattr__(self, "sigma", check_sigma(self.sigma))

    @property
    def label(self) -> str:
        return setting_label(self.setting, self.size)

    @property
    def stream(self) -> int:
        """Stable per-row stream id so rows sharing a master seed draw independently."""
        return zlib.crc32(f"{self.setting}/{self.size}/{self.n}".encode())

    def space(self) -> MetricSpace:
        return setting_space(self.setting, self.size)


def profile_rng(config: SweepConfig, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(config.stream, index)))


def run_profile(config: SweepConfig, index: int) -> dict:
    """Draw and evaluate profile ``index``, redrawing while OPT is not positive."""
    space = config.space()
    rng = profile_rng(config, index)
    for attempt in range(1, MAX_RESAMPLES + 1):
        votes, s = sample_profile(space, config.n, rng, config.status_quo)
        rec = evaluate_profile(space, votes, s, config.sigma, config.cap)
        if not rec["vacuous"]:
            break
    else:
        raise RuntimeError(f"profile {index}: no non-vacuous draw in {MAX_RESAMPLES} attempts")
    return {
        "setting": config.label,
        "n": config.n,
        "profile": index,
        "seed": f"{config.seed}:{config.stream}:{index}",
        "attempts": attempt,
        **rec,
    }


def _run_profile_args(args):
    return run_profile(*args)


@dataclass
class SweepStats:
    setting: str
    n: int
    profiles: int
    positive_cg_freq: float
    gap_closing_ratio: float
    hit_rate: float
    positive_cg: int = 0
    hits: int = 0
    closing_count: int = 0
    records: list = field(default_factory=list, repr=False)

    def row(self) -> dict:
        return {
            "setting": self.setting,
            "n": self.n,
            "profiles": self.profiles,
            "positive_cg_freq": f"{self.positive_cg_freq:.4f}",
            "gap_closing_ratio": f"{self.gap_closing_ratio:.4f}",
            "hit_rate": f"{self.hit_rate:.4f}",
        }


def summarize(records: Sequence[dict], setting: str | None = None, n: int | None = None) -> SweepStats:
    """The three sweep statistics, recomputed from raw records."""
    recs = sorted(records, key=lambda r: r["profile"])
    total = len(recs)
    pos = sum(r["positive_cg"] for r in recs)
    hits = sum(r["hit"] for r in recs)
    ratios = [r["gap_closing"] for r in recs if r["gap_closing"] is not None]
    return SweepStats(
        setting=setting if setting is not None else (recs[0]["setting"] if recs else ""),
        n=n if n is not None else (recs[0]["n"] if recs else 0),
        profiles=total,
        positive_cg_freq=pos / total if total else 0.0,
        gap_closing_ratio=float(np.mean(ratios)) if ratios else 0.0,
        hit_rate=hits / total if total else 0.0,
        positive_cg=pos,
        hits=hits,
        closing_count=len(ratios),
        records=recs,
    )


def sweep(config: SweepConfig, jobs: int = 1, pool: Pool | None = None) -> SweepStats:
    tasks = [(config, i) for i in range(config.profiles)]
    if pool is not None:
        records = pool.map(_run_profile_args, tasks, chunksize=max(1, len(tasks) // (4 * jobs or 1)))
    elif jobs > 1:
        with Pool(jobs) as p:
            records = p.map(_run_profile_args, tasks, chunksize=max(1, len(tasks) // (4 * jobs)))
    else:
        records = [run_profile(config, i) for i in range(config.profiles)]
    return summarize(records, config.label, config.n)


# ---------------------------------------------------------------------------
# configuration grids

HEADLINE_ROWS = (
    ("euclid2d", None, 5), ("euclid2d", None, 21), ("euclid2d", None, 51),
    ("simplex", 4, 5), ("simplex", 4, 21),
    ("hypercube", 8, 5), ("hypercube", 8, 21),
    ("permutations", 5, 5), ("permutations", 5, 21),
)

FULL_ROWS = (
    tuple(("euclid2d", None, n) for n in (5, 11, 21, 51))
    + tuple(("simplex", m, n) for m in (3, 4) for n in (5, 11, 21))
    + tuple(("hypercube", a, n) for a in (6, 8, 10) for n in (5, 11, 21))
    + tuple(("permutations", m, n) for m in (4, 5, 6) for n in (5, 11, 21))
)

GRIDS = {"headline": HEADLINE_ROWS, "full": FULL_ROWS}


def configs_from_document(doc: dict, seed: int) -> list[SweepConfig]:
    """Sweep rows from a configuration document: a named grid or explicit rows."""
    profiles = int(doc.get("profiles", 300))
    sigma = doc.get("sigma", "1/2")
    policy = doc.get("status_quo", "same-distribution")
    cap = int(doc.get("cap", 8))
    if "grid" in doc:
        try:
            rows = GRIDS[doc["grid"]]
        except KeyError:
            raise ValueError(f"unknown grid {doc['grid']!r}") from None
    else:
        rows = [(r["setting"], r.get("size"), int(r["n"])) for r in doc["rows"]]
    return [SweepConfig(st, n, size, profiles, sigma, seed, policy, cap) for st, size, n in rows]


def run_sweep(configs: Sequence[SweepConfig], jobs: int = 1) -> list[SweepStats]:
    if jobs > 1:
        with Pool(jobs) as pool:
            return [sweep(c, jobs, pool) for c in configs]
    return [sweep(c) for c in configs]


def summary_csv(stats: Sequence[SweepStats]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for st in stats:
        w.writerow(st.row())
    return buf.getvalue()


def records_jsonl(stats: Sequence[SweepStats]) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for st in stats for r in st.records)


def write_outputs(stats: Sequence[SweepStats], out: Path, meta: dict | None = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.csv").write_text(summary_csv(stats))
    (out / "records.jsonl").write_text(records_jsonl(stats))
    if meta is not None:
        (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def config_meta(configs: Sequence[SweepConfig]) -> dict:
    def one(c: SweepConfig) -> dict:
        d = asdict(c)
        d["sigma"] = str(c.sigma)
        d["label"] = c.label
        return d

    return {"rows": [one(c) for c in configs], "columns": list(CSV_COLUMNS)}


def check_summary_csv(text: str) -> list[str]:
    """Schema problems in a summary CSV; empty when it conforms."""
    problems = []
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        return [f"header must be {','.join(CSV_COLUMNS)}"]
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(CSV_COLUMNS):
            problems.append(f"line {i}: expected {len(CSV_COLUMNS)} fields")
            continue
        try:
            if int(row[1]) < 1 or int(row[2]) < 1:
                problems.append(f"line {i}: n and profiles must be positive")
        except ValueError:
            problems.append(f"line {i}: n and profiles must be integers")
        for name, val in zip(CSV_COLUMNS[3:], row[3:]):
            parts = val.split(".")
            if len(parts) != 2 or len(parts[1]) != 4:
                problems.append(f"line {i}: {name} must have 4 decimals")
                continue
            try:
                x = float(val)
            except ValueError:
                problems.append(f"line {i}: {name} is not a number")
                continue
            if not 0 <= x <= 1:
                problems.append(f"line {i}: {name} outside [0, 1]")
    return problems


# ---------------------------------------------------------------------------
# random proposal source


class RandomSource:
    """Submits random points on behalf of random members; seeded for reproducible traces."""

    def __init__(self, seed: int, per_round: int = 3, near: float | None = 0.5):
        self.rng = np.random.default_rng(seed)
        self.per_round = per_round
        self.near = near

    def _candidate(self, state: EpochState):
        space = state.space
        point = sample_point(space, self.rng)
        if self.near is not None and isinstance(space, (Euclidean, Simplex, Scalar1D)) and self.rng.random() < self.near:
            # pull towards a random vote so some draws are supported
            v = state.votes[int(self.rng.integers(state.n))]
            t = float(self.rng.random())
            if isinstance(space, Scalar1D):
                return float(v) + t * (float(point) - float(v))
            return tuple(float(a) + t * (float(b) - float(a)) for a, b in zip(v, point))
        return point

    def propose(self, state: EpochState):
        out = []
        for _ in range(self.per_round):
            c = self._candidate(state)
            s = state.config.status_quo
            fans = [i for i in range(state.n) if utility(state.space, s, state.votes[i], c) > 0]
            member = int(self.rng.choice(fans)) if fans else int(self.rng.integers(state.n))
            kind = "update" if member in state.current_public else "submit"
            if kind == "update" and self.rng.random() < 0.2:
                out.append(Action(member, None, "withdraw"))
                continue
            out.append(Action(member, c, kind))
        return out


__all__ = [
    "CSV_COLUMNS",
    "FULL_ROWS",
    "HEADLINE_ROWS",
    "RandomSource",
    "SweepConfig",
    "SweepStats",
    "check_summary_csv",
    "configs_from_document",
    "evaluate_profile",
    "run_profile",
    "run_sweep",
    "sample_point",
    "sample_profile",
    "summarize",
    "summary_csv",
    "sweep",
    "write_outputs",
]
