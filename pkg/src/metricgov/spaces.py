"""Metric spaces for governance components.

Each space is an immutable descriptor that owns three things: the distance
between two payloads, a canonical order on payloads (used for tie-breaking
and enumeration), and a vectorised ``cross`` that returns the full distance
matrix between two batches of points as a numpy array.

Payloads are plain Python values:

========================  ==============================================
space                     payload
========================  ==============================================
:class:`Plurality`        candidate label (``str``) or :data:`VACANT`
:class:`Scalar1D`         real number (``int``, ``float`` or ``Fraction``)
:class:`Euclidean`        tuple of floats of length ``dim``
:class:`Simplex`          tuple of ``m`` non-negative floats summing to 1
:class:`Permutations`     tuple of item indices, best first (0-based)
:class:`Subsets`          ``frozenset`` of ground-set elements
:class:`Strings`          ``str`` over the alphabet
:class:`FiniteTable`      point label (``str``)
========================  ==============================================

Distances are exact (``int`` / ``Fraction``) for the combinatorial kinds and
floats for the continuous ones; :attr:`MetricSpace.exact` says which.
"""

from __future__ import annotations

import functools
import itertools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

VACANT = "⊥"
SIMPLEX_TOL = 1e-9
DEFAULT_CAP = 8
ENUMERATION_LIMITS = {"permutations": 8, "subsets": 16}


class PointSpaceMismatch(TypeError):
    """A payload does not have the shape of the space it is used with."""


class InvalidPoint(ValueError):
    """A payload has the right shape but violates a space invariant."""


class InvalidSpace(ValueError):
    pass


class SpaceNotEnumerable(ValueError):
    pass


class DegeneratePair(ValueError):
    pass


def _is_real(x) -> bool:
    return isinstance(x, Real) and not isinstance(x, bool)


class MetricSpace(ABC):
    kind: str = ""
    exact: bool = False
    finite: bool = False

    @abstractmethod
    def distance(self, x, y):
        """Distance between two valid payloads."""

    @abstractmethod
    def violations(self, x) -> list[str]:
        """Every invariant ``x`` violates; empty when ``x`` is a valid point."""

    @abstractmethod
    def sort_key(self, x):
        """Key of ``x`` in the canonical order."""

    @abstractmethod
    def midpoints(self, p, q, cap: int) -> list:
        ...

    @abstractmethod
    def to_dict(self) -> dict:
        ...

    def encode_point(self, x):
        return x

    def decode_point(self, raw):
        return raw

    def default_epsilon(self):
        return 1

    # numpy representation used by ``cross``; subclasses with a faster
    # representation override all three
    def to_array(self, points: Sequence) -> np.ndarray:
        arr = np.empty(len(points), dtype=object)
        for i, p in enumerate(points):
            arr[i] = p
        return arr

    def from_array(self, arr: np.ndarray) -> list:
        return list(arr)

    def cross(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        out = np.empty((len(a), len(b)), dtype=float)
        for i, x in enumerate(a):
            for j, y in enumerate(b):
                out[i, j] = float(self.distance(x, y))
        return out

    def iter_points(self) -> Iterator:
        raise SpaceNotEnumerable(f"{self.kind} space is not enumerable")

    def is_valid(self, x) -> bool:
        try:
            return not self.violations(x)
        except PointSpaceMismatch:
            return False

    def check(self, x):
        problems = self.violations(x)
        if problems:
            raise InvalidPoint(f"{x!r}: " + "; ".join(problems))
        return x

    def sorted(self, points: Iterable) -> list:
        return sorted(points, key=self.sort_key)


# ---------------------------------------------------------------------------
# plurality


@dataclass(frozen=True)
class Plurality(MetricSpace):
    """Discrete metric on a candidate set plus the vacancy marker."""

    candidates: tuple[str, ...]
    kind = "plurality"
    exact = True
    finite = True

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not self.candidates:
            raise InvalidSpace("plurality space needs at least one candidate")
        if len(set(self.candidates)) != len(self.candidates) or VACANT in self.candidates:
            raise InvalidSpace("candidates must be distinct and may not use the vacancy marker")

    @functools.cached_property
    def _index(self) -> dict:
        index = {VACANT: -1}
        index.update((c, i) for i, c in enumerate(self.candidates))
        return index

    def _shape(self, x):
        if not isinstance(x, str):
            raise PointSpaceMismatch(f"plurality payload must be a label, got {x!r}")

    def distance(self, x, y):
        self._shape(x)
        self._shape(y)
        return 0 if x == y else 1

    def violations(self, x):
        self._shape(x)
        if x not in self._index:
            return [f"unknown candidate {x!r}"]
        return []

    def sort_key(self, x):
        return self._index[x]

    def iter_points(self):
        yield VACANT
        yield from self.candidates

    def midpoints(self, p, q, cap):
        # the discrete metric has no point strictly between two others
        return []

    def to_array(self, points):
        return np.array([self._index[p] for p in points], dtype=np.int64)

    def from_array(self, arr):
        return [VACANT if i < 0 else self.candidates[i] for i in arr]

    def cross(self, a, b):
        return (a[:, None] != b[None, :]).astype(float)

    def to_dict(self):
        return {"kind": self.kind, "candidates": list(self.candidates)}


# ---------------------------------------------------------------------------
# scalar


def _half(x, y):
    if isinstance(x, (int, Fraction)) and isinstance(y, (int, Fraction)):
        mid = Fraction(x) + Fraction(y)
        mid /= 2
        return int(mid) if mid.denominator == 1 else mid
    return (x + y) / 2


@dataclass(frozen=True)
class Scalar1D(MetricSpace):
    """An interval of the real line with ``|x - y|``. Bounds may be ``None``."""

    low: Any = None
    high: Any = None
    kind = "scalar"

    def __post_init__(self):
        if self.low is not None and self.high is not None and self.low > self.high:
            raise InvalidSpace("empty interval")

    def _shape(self, x):
        if not _is_real(x):
            raise PointSpaceMismatch(f"scalar payload must be a real number, got {x!r}")

    def distance(self, x, y):
        self._shape(x)
        self._shape(y)
        return abs(x - y)

    def violations(self, x):
        self._shape(x)
        out = []
        if isinstance(x, float) and not math.isfinite(x):
            out.append("not finite")
        if self.low is not None and x < self.low:
            out.append(f"below interval start {self.low}")
        if self.high is not None and x > self.high:
            out.append(f"above interval end {self.high}")
        return out

    def sort_key(self, x):
        return x

    def midpoints(self, p, q, cap):
        if p == q:
            raise DegeneratePair("midpoint of identical points")
        return [_half(p, q)]

    def default_epsilon(self):
        if self.low is None or self.high is None:
            return 1e-3
        return 1e-3 * (self.high - self.low)

    def encode_point(self, x):
        if isinstance(x, Fraction):
            return str(x)
        return x

    def decode_point(self, raw):
        if isinstance(raw, str):
            return Fraction(raw)
        return raw

    def to_array(self, points):
        return np.array([float(p) for p in points], dtype=float)

    def from_array(self, arr):
        return [float(x) for x in arr]

    def cross(self, a, b):
        return np.abs(a[:, None] - b[None, :])

    def to_dict(self):
        return {"kind": self.kind, "low": self.encode_point(self.low) if self.low is not None else None,
                "high": self.encode_point(self.high) if self.high is not None else None}


# ---------------------------------------------------------------------------
# vector spaces


class _VectorSpace(MetricSpace):
    dim: int

    def _shape(self, x):
        if not isinstance(x, (tuple, list, np.ndarray)) or len(x) != self.dim:
            raise PointSpaceMismatch(f"{self.kind} payload must be a length-{self.dim} vector, got {x!r}")

    def distance(self, x, y):
        self._shape(x)
        self._shape(y)
        return math.dist(x, y)

    def sort_key(self, x):
        return tuple(x)

    def midpoints(self, p, q, cap):
        if tuple(p) == tuple(q):
            raise DegeneratePair("midpoint of identical points")
        return [tuple((a + b) / 2 for a, b in zip(p, q))]

    def default_epsilon(self):
        return 1e-3

    def encode_point(self, x):
        return [float(c) for c in x]

    def decode_point(self, raw):
        return tuple(float(c) for c in raw)

    def to_array(self, points):
        return np.asarray(points, dtype=float).reshape(len(points), self.dim)

    def from_array(self, arr):
        return [tuple(float(c) for c in row) for row in arr]

    def cross(self, a, b):
        diff = a[:, None, :] - b[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


@dataclass(frozen=True)
class Euclidean(_VectorSpace):
    """``R^dim`` with the Euclidean metric."""

    dim: int = 2
    kind = "euclidean"

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidSpace("dimension must be positive")

    def violations(self, x):
        self._shape(x)
        return [] if all(math.isfinite(float(c)) for c in x) else ["non-finite coordinate"]

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim}


@dataclass(frozen=True)
class Simplex(_VectorSpace):
    """Probability simplex on ``m`` categories with the Euclidean metric."""

    m: int = 3
    kind = "simplex"

    def __post_init__(self):
        if self.m < 2:
            raise InvalidSpace("simplex needs m >= 2")

    @property
    def dim(self) -> int:
        return self.m

    def violations(self, x):
        self._shape(x)
        out = []
        if any(c < 0 for c in x):
            out.append("negative entry")
        if abs(math.fsum(x) - 1.0) > SIMPLEX_TOL:
            out.append("entries do not sum to 1")
        return out

    @staticmethod
    def normalize(x) -> tuple[float, ...]:
        """Explicit renormalisation; never applied implicitly."""
        arr = np.clip(np.asarray(x, dtype=float), 0.0, None)
        total = arr.sum()
        if total <= 0:
            raise InvalidPoint("cannot normalise a vector with no positive mass")
        return tuple(float(c) for c in arr / total)

    def to_dict(self):
        return {"kind": self.kind, "m": self.m}


# ---------------------------------------------------------------------------
# permutations


def count_inversions(seq: Sequence[int]) -> int:
    """Inversions of an integer sequence by merge sort, O(m log m)."""

    def sort(a):
        if len(a) <= 1:
            return a, 0
        mid = len(a) // 2
        left, inv_l = sort(a[:mid])
        right, inv_r = sort(a[mid:])
        merged, inv = [], inv_l + inv_r
        i = j = 0
        while i < len(left) and j < len(right):
            if left[i] <= right[j]:
                merged.append(left[i])
                i += 1
            else:
                merged.append(right[j])
                inv += len(left) - i
                j += 1
        merged.extend(left[i:])
        merged.extend(right[j:])
        return merged, inv

    return sort(list(seq))[1]


def bubble_path(p: Sequence[int], q: Sequence[int]) -> list[tuple[int, ...]]:
    """Adjacent-swap geodesic from ``p`` to ``q`` produced by bubble sort."""
    rank = {item: i for i, item in enumerate(q)}
    cur = list(p)
    path = [tuple(cur)]
    for end in range(len(cur) - 1, 0, -1):
        for j in range(end):
            if rank[cur[j]] > rank[cur[j + 1]]:
                cur[j], cur[j + 1] = cur[j + 1], cur[j]
                path.append(tuple(cur))
    return path


@dataclass(frozen=True)
class Permutations(MetricSpace):
    """Rankings of ``m`` items under the swap (Kendall tau) distance.

    A payload lists item indices from most to least preferred.
    """

    m: int
    items: tuple[str, ...] | None = None
    kind = "permutations"
    exact = True
    finite = True

    def __post_init__(self):
        if self.m < 1:
            raise InvalidSpace("permutations need m >= 1")
        if self.items is not None:
            object.__setattr__(self, "items", tuple(self.items))
            if len(self.items) != self.m:
                raise InvalidSpace("items must have length m")

    def _shape(self, x):
        if not isinstance(x, (tuple, list)) or len(x) != self.m:
            raise PointSpaceMismatch(f"permutation payload must be a length-{self.m} sequence, got {x!r}")

    def distance(self, x, y):
        self._shape(x)
        self._shape(y)
        pos = {item: i for i, item in enumerate(y)}
        return count_inversions([pos[item] for item in x])

    def violations(self, x):
        self._shape(x)
        if sorted(x) != list(range(self.m)):
            return ["not a bijection"]
        return []

    def sort_key(self, x):
        return tuple(x)

    def iter_points(self):
        if self.m > ENUMERATION_LIMITS["permutations"]:
            raise SpaceNotEnumerable(f"permutations with m={self.m} exceed the enumeration limit")
        return itertools.permutations(range(self.m))

    def midpoints(self, p, q, cap):
        p, q = tuple(p), tuple(q)
        if p == q:
            raise DegeneratePair("midpoint of identical points")
        out = []
        for path in (bubble_path(p, q), bubble_path(q, p)):
            d = len(path) - 1
            for step in (d // 2, (d + 1) // 2):
                c = path[step]
                if c not in (p, q) and c not in out:
                    out.append(c)
        return out[:cap]

    def encode_point(self, x):
        return list(x)

    def decode_point(self, raw):
        if self.items is not None and raw and isinstance(raw[0], str):
            lookup = {name: i for i, name in enumerate(self.items)}
            return tuple(lookup[name] for name in raw)
        return tuple(int(i) for i in raw)

    @functools.cached_property
    def _pairs(self):
        return np.array(list(itertools.combinations(range(self.m), 2)), dtype=np.int64).reshape(-1, 2)

    def to_array(self, points):
        return np.asarray(points, dtype=np.int64).reshape(len(points), self.m)

    def from_array(self, arr):
        return [tuple(int(i) for i in row) for row in arr]

    def _signs(self, arr):
        pos = np.argsort(arr, axis=1)
        return np.sign(pos[:, self._pairs[:, 0]] - pos[:, self._pairs[:, 1]]).astype(float)

    def cross(self, a, b):
        npairs = len(self._pairs)
        if npairs == 0:
            return np.zeros((len(a), len(b)))
        return (npairs - self._signs(a) @ self._signs(b).T) / 2

    def to_dict(self):
        out = {"kind": self.kind, "m": self.m}
        if self.items is not None:
            out["items"] = list(self.items)
        return out


# ---------------------------------------------------------------------------
# subsets


def _popcount(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(a.astype(np.uint64)).astype(np.int64)


@dataclass(frozen=True)
class Subsets(MetricSpace):
    """Subsets of a ground set under symmetric difference, optionally of fixed size."""

    ground: tuple
    size: int | None = None
    kind = "subsets"
    exact = True
    finite = True

    def __post_init__(self):
        object.__setattr__(self, "ground", tuple(self.ground))
        if not self.ground:
            raise InvalidSpace("ground set must be non-empty")
        if len(set(self.ground)) != len(self.ground):
            raise InvalidSpace("ground set elements must be distinct")
        if self.size is not None and not 0 <= self.size <= len(self.ground):
            raise InvalidSpace("fixed size out of range")

    @functools.cached_property
    def _bit(self) -> dict:
        return {e: i for i, e in enumerate(self.ground)}

    def _shape(self, x):
        if not isinstance(x, (frozenset, set)):
            raise PointSpaceMismatch(f"subset payload must be a set, got {x!r}")

    def mask(self, x) -> int:
        return sum(1 << self._bit[e] for e in x)

    def unmask(self, mask: int) -> frozenset:
        return frozenset(e for i, e in enumerate(self.ground) if mask >> i & 1)

    def distance(self, x, y):
        self._shape(x)
        self._shape(y)
        return len(x ^ y)

    def violations(self, x):
        self._shape(x)
        out = []
        unknown = [e for e in x if e not in self._bit]
        if unknown:
            out.append(f"elements outside the ground set: {unknown!r}")
        if self.size is not None and len(x) != self.size:
            out.append(f"size {len(x)} differs from required {self.size}")
        return out

    def sort_key(self, x):
        return self.mask(x)

    def iter_points(self):
        if len(self.ground) > ENUMERATION_LIMITS["subsets"]:
            raise SpaceNotEnumerable(f"ground set of {len(self.ground)} exceeds the enumeration limit")
        for mask in range(1 << len(self.ground)):
            if self.size is None or mask.bit_count() == self.size:
                yield self.unmask(mask)

    def midpoints(self, p, q, cap):
        p, q = frozenset(p), frozenset(q)
        if p == q:
            raise DegeneratePair("midpoint of identical points")
        masks = interval_midpoints(self.mask(p), self.mask(q), cap, self.size)
        return [self.unmask(int(m)) for m in masks]

    def encode_point(self, x):
        return sorted(x, key=lambda e: self._bit[e])

    def decode_point(self, raw):
        return frozenset(raw)

    def to_array(self, points):
        return np.array([self.mask(p) for p in points], dtype=np.int64)

    def from_array(self, arr):
        return [self.unmask(int(m)) for m in arr]

    def cross(self, a, b):
        return _popcount(a[:, None] ^ b[None, :]).astype(float)

    def to_dict(self):
        return {"kind": self.kind, "ground": list(self.ground), "size": self.size}


def interval_midpoints(p: int, q: int, cap: int, size: int | None = None) -> list[int]:
    """Bitmasks in the lattice interval ``[p & q, p | q]`` nearest to balanced.

    Candidates are ordered by ``|d(p, x) - d(q, x)|`` then by mask value, with
    ``p`` and ``q`` themselves excluded. Differences of up to 16 elements are
    enumerated in full; larger ones are built level by level.
    """
    base, diff = p & q, p ^ q
    bits = [i for i in range(diff.bit_length()) if diff >> i & 1]
    k = len(bits)
    if k <= 16:
        sub = np.arange(1 << k, dtype=np.int64)
        xs = np.full(sub.shape, base, dtype=np.int64)
        for t, b in enumerate(bits):
            xs |= ((sub >> t) & 1) << b
        keep = (xs != p) & (xs != q)
        if size is not None:
            keep &= _popcount(xs) == size
        xs = xs[keep]
        balance = np.abs(_popcount(xs ^ p) - _popcount(xs ^ q))
        order = np.lexsort((xs, balance))
        return [int(x) for x in xs[order[:cap]]]
    # large differences: choose a bits of p-only and b bits of q-only
    p_only = [b for b in bits if p >> b & 1]
    q_only = [b for b in bits if q >> b & 1]
    levels = sorted(
        ((a, b) for a in range(len(p_only) + 1) for b in range(len(q_only) + 1)),
        key=lambda ab: (abs((len(p_only) - ab[0]) + ab[1] - ab[0] - (len(q_only) - ab[1])), ab),
    )
    out: list[int] = []
    for a, b in levels:
        for keep_p in itertools.combinations(p_only, a):
            for add_q in itertools.combinations(q_only, b):
                x = base | sum(1 << i for i in keep_p) | sum(1 << i for i in add_q)
                if x in (p, q) or (size is not None and x.bit_count() != size):
                    continue
                out.append(x)
                if len(out) >= cap:
                    return out
    return out


# ---------------------------------------------------------------------------
# strings


def _kept_matchings(x: str, y: str) -> Iterator[list[tuple[int, int]]]:
    """Maximum matchings of equal characters, order-preserving within a character."""
    per_char = []
    for ch in sorted(set(x) & set(y)):
        xi = [i for i, c in enumerate(x) if c == ch]
        yi = [j for j, c in enumerate(y) if c == ch]
        k = min(len(xi), len(yi))
        options = [
            list(zip(xs, ys))
            for xs in itertools.combinations(xi, k)
            for ys in itertools.combinations(yi, k)
        ]
        per_char.append(options)
    for choice in itertools.product(*per_char):
        yield [pair for part in choice for pair in part]


def _best_matching(x: str, y: str) -> tuple[list[tuple[int, int]], int]:
    best, best_inv = [], None
    for matching in _kept_matchings(x, y):
        matching.sort()
        inv = count_inversions([j for _, j in matching])
        if best_inv is None or inv < best_inv:
            best, best_inv = matching, inv
            if inv == 0:
                break
    return best, best_inv or 0


@dataclass(frozen=True)
class Strings(MetricSpace):
    """Texts over a finite alphabet under weighted edit distance.

    Insertions and deletions cost 1 and swapping two adjacent symbols costs
    ``1 / max_length**2``. The distance is the cheapest edit script; since the
    total swap cost of any script is below 1/2, a cheapest script keeps as many
    symbols as the two texts share and then orders the kept symbols with the
    fewest swaps.
    """

    alphabet: str
    max_length: int
    kind = "strings"
    exact = True

    def __post_init__(self):
        if not self.alphabet or len(set(self.alphabet)) != len(self.alphabet):
            raise InvalidSpace("alphabet must be non-empty with distinct symbols")
        if self.max_length < 1:
            raise InvalidSpace("max_length must be positive")

    @property
    def swap_cost(self) -> Fraction:
        return Fraction(1, self.max_length**2)

    def _shape(self, x):
        if not isinstance(x, str):
            raise PointSpaceMismatch(f"string payload must be str, got {x!r}")

    def distance(self, x, y):
        self._shape(x)
        self._shape(y)
        if x == y:
            return Fraction(0)
        matching, inv = _best_matching(x, y)
        return Fraction(len(x) + len(y) - 2 * len(matching)) + inv * self.swap_cost

    def edit_script(self, x: str, y: str) -> list[tuple[str, int, str]]:
        """A cheapest script as ``(op, position, symbol)`` steps: deletions, swaps, insertions."""
        matching, _ = _best_matching(x, y)
        kept_x = {i for i, _ in matching}
        target_of = dict(matching)
        script = []
        cur = list(x)
        ranks = []
        for i in range(len(x) - 1, -1, -1):
            if i not in kept_x:
                script.append(("delete", i, x[i]))
                del cur[i]
        ranks = [target_of[i] for i in range(len(x)) if i in kept_x]
        for end in range(len(ranks) - 1, 0, -1):
            for j in range(end):
                if ranks[j] > ranks[j + 1]:
                    ranks[j], ranks[j + 1] = ranks[j + 1], ranks[j]
                    script.append(("swap", j, cur[j]))
                    cur[j], cur[j + 1] = cur[j + 1], cur[j]
        kept_y = {j for _, j in matching}
        for j in range(len(y)):
            if j not in kept_y:
                script.append(("insert", j, y[j]))
        return script

    @staticmethod
    def apply_script(x: str, script: Iterable[tuple[str, int, str]]) -> str:
        cur = list(x)
        for op, pos, sym in script:
            if op == "delete":
                del cur[pos]
            elif op == "swap":
                cur[pos], cur[pos + 1] = cur[pos + 1], cur[pos]
            else:
                cur.insert(pos, sym)
        return "".join(cur)

    def violations(self, x):
        self._shape(x)
        out = []
        if len(x) > self.max_length:
            out.append(f"length {len(x)} exceeds {self.max_length}")
        bad = sorted(set(x) - set(self.alphabet))
        if bad:
            out.append(f"symbols outside the alphabet: {bad!r}")
        return out

    def sort_key(self, x):
        return (len(x), [self.alphabet.index(c) for c in x])

    def iter_points(self, max_length: int | None = None):
        bound = self.max_length if max_length is None else min(max_length, self.max_length)
        for length in range(bound + 1):
            for chars in itertools.product(self.alphabet, repeat=length):
                yield "".join(chars)

    def midpoints(self, p, q, cap):
        if p == q:
            raise DegeneratePair("midpoint of identical points")
        script = self.edit_script(p, q)
        c = self.apply_script(p, script[: len(script) // 2])
        return [] if c in (p, q) else [c][:cap]

    def default_epsilon(self):
        return self.swap_cost

    def to_dict(self):
        return {"kind": self.kind, "alphabet": self.alphabet, "max_length": self.max_length}


# ---------------------------------------------------------------------------
# finite tables


@dataclass(frozen=True)
class FiniteTable(MetricSpace):
    """A finite metric given by labels and a full distance matrix."""

    labels: tuple[str, ...]
    matrix: tuple[tuple[float, ...], ...]
    tol: float = field(default=1e-9, compare=False)
    kind = "table"
    finite = True

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "matrix", tuple(tuple(float(v) for v in row) for row in self.matrix))
        problems = table_violations(self.labels, self.matrix, self.tol)
        if problems:
            raise InvalidSpace("; ".join(problems[:5]))

    @classmethod
    def from_edges(cls, labels: Sequence[str], edges: Iterable[tuple[str, str, float]]) -> FiniteTable:
        """Shortest-path metric of a weighted undirected graph."""
        from scipy.sparse.csgraph import shortest_path

        index = {name: i for i, name in enumerate(labels)}
        w = np.full((len(labels), len(labels)), np.inf)
        np.fill_diagonal(w, 0.0)
        for a, b, d in edges:
            i, j = index[a], index[b]
            w[i, j] = w[j, i] = min(w[i, j], float(d))
        dist = shortest_path(np.where(np.isinf(w), 0.0, w), method="FW", directed=False)
        if np.isinf(dist).any():
            raise InvalidSpace("graph is disconnected")
        return cls(tuple(labels), tuple(map(tuple, dist)))

    @functools.cached_property
    def _index(self) -> dict:
        return {name: i for i, name in enumerate(self.labels)}

    @functools.cached_property
    def _array(self) -> np.ndarray:
        return np.array(self.matrix)

    def _shape(self, x):
        if not isinstance(x, str):
            raise PointSpaceMismatch(f"table payload must be a label, got {x!r}")

    def distance(self, x, y):
        self._shape(x)
        self._shape(y)
        return self.matrix[self._index[x]][self._index[y]]

    def violations(self, x):
        self._shape(x)
        return [] if x in self._index else [f"unknown point {x!r}"]

    def sort_key(self, x):
        return self._index[x]

    def iter_points(self):
        return iter(self.labels)

    def midpoints(self, p, q, cap):
        if p == q:
            raise DegeneratePair("midpoint of identical points")
        i, j = self._index[p], self._index[q]
        through = self._array[i] + self._array[j]
        best = through.min()
        cands = [
            k for k in range(len(self.labels))
            if k not in (i, j) and through[k] <= best + self.tol
        ]
        cands.sort(key=lambda k: (abs(self._array[i, k] - self._array[j, k]), k))
        return [self.labels[k] for k in cands[:cap]]

    def default_epsilon(self):
        off = self._array[~np.eye(len(self.labels), dtype=bool)]
        return float(off.min()) if off.size else 1.0

    def to_array(self, points):
        return np.array([self._index[p] for p in points], dtype=np.int64)

    def from_array(self, arr):
        return [self.labels[i] for i in arr]

    def cross(self, a, b):
        return self._array[np.ix_(a, b)]

    def to_dict(self):
        return {"kind": self.kind, "labels": list(self.labels), "distances": [list(r) for r in self.matrix]}


def table_violations(labels, matrix, tol: float = 1e-9) -> list[str]:
    n = len(labels)
    out = []
    if len(set(labels)) != n:
        out.append("labels must be distinct")
    d = np.asarray(matrix, dtype=float)
    if d.shape != (n, n):
        return out + [f"matrix shape {d.shape} does not match {n} labels"]
    if not np.allclose(d, d.T, atol=tol):
        out.append("matrix is not symmetric")
    if np.abs(np.diag(d)).max(initial=0.0) > tol:
        out.append("diagonal is not zero")
    off = d[~np.eye(n, dtype=bool)]
    if (off <= tol).any():
        out.append("distinct points at zero distance")
    # d[i,k] <= d[i,j] + d[j,k] for all triples
    excess = d[:, None, :] - d[:, :, None] - d[None, :, :]
    if n and excess.max() > tol:
        i, j, k = np.unravel_index(int(excess.argmax()), excess.shape)
        out.append(f"triangle inequality fails for ({labels[i]}, {labels[j]}, {labels[k]})")
    return out


# ---------------------------------------------------------------------------
# module-level operations


def distance(space: MetricSpace, x, y):
    return space.distance(x, y)


def validate_point(space: MetricSpace, x) -> list[str]:
    """Return every violated point invariant; an empty list means ``x`` is valid."""
    try:
        return space.violations(x)
    except PointSpaceMismatch as exc:
        return [str(exc)]


def enumerate_space(space: MetricSpace, max_length: int | None = None) -> Iterator:
    if isinstance(space, Strings):
        if max_length is None:
            raise SpaceNotEnumerable("strings are enumerable only up to an explicit length bound")
        return space.iter_points(max_length)
    return space.iter_points()


def midpoint_candidates(space: MetricSpace, p, q, cap: int = DEFAULT_CAP) -> list:
    """Bounded set of points between ``p`` and ``q`` used by pairwise compromise search."""
    if cap < 1:
        raise ValueError("cap must be positive")
    return space.midpoints(p, q, cap)


@functools.lru_cache(maxsize=64)
def enumerated_array(space: MetricSpace) -> np.ndarray:
    return space.to_array(list(space.iter_points()))


_KINDS = {
    "plurality": lambda d: Plurality(tuple(d["candidates"])),
    "scalar": lambda d: Scalar1D(
        Scalar1D().decode_point(d["low"]) if d.get("low") is not None else None,
        Scalar1D().decode_point(d["high"]) if d.get("high") is not None else None,
    ),
    "euclidean": lambda d: Euclidean(int(d.get("dim", 2))),
    "simplex": lambda d: Simplex(int(d["m"])),
    "permutations": lambda d: Permutations(int(d["m"]), tuple(d["items"]) if d.get("items") else None),
    "subsets": lambda d: Subsets(tuple(d["ground"]), d.get("size")),
    "strings": lambda d: Strings(d["alphabet"], int(d["max_length"])),
    "table": lambda d: (
        FiniteTable.from_edges(d["labels"], [tuple(e) for e in d["edges"]])
        if "edges" in d
        else FiniteTable(tuple(d["labels"]), tuple(map(tuple, d["distances"])))
    ),
}


def space_from_dict(data: dict) -> MetricSpace:
    """Build a space from its configuration document (see ``to_dict``)."""
    try:
        build = _KINDS[data["kind"]]
    except KeyError:
        raise InvalidSpace(f"unknown space kind {data.get('kind')!r}") from None
    try:
        return build(data)
    except (KeyError, TypeError) as exc:
        raise InvalidSpace(f"malformed {data['kind']} space: {exc}") from None


def space_to_dict(space: MetricSpace) -> dict:
    return space.to_dict()
