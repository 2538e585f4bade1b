from __future__ import annotations

import itertools
import json
import math
import zlib
from collections import deque
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from helpers import TRIALS, all_spaces
from metricgov.sim import sample_point
from metricgov.spaces import (
    VACANT,
    DegeneratePair,
    Euclidean,
    FiniteTable,
    InvalidSpace,
    Permutations,
    Plurality,
    PointSpaceMismatch,
    Scalar1D,
    Simplex,
    SpaceNotEnumerable,
    Strings,
    Subsets,
    count_inversions,
    distance,
    enumerate_space,
    midpoint_candidates,
    space_from_dict,
    validate_point,
)

SPACES = all_spaces()


def _eq(space, a, b):
    if isinstance(space, (Euclidean, Simplex)):
        return tuple(a) == tuple(b)
    return a == b


@pytest.mark.parametrize("kind", sorted(SPACES))
def test_metric_axioms(kind):
    space = SPACES[kind]
    rng = np.random.default_rng(zlib.crc32(kind.encode()))
    pts = [sample_point(space, rng) for _ in range(3 * TRIALS)]
    exact = space.exact
    slack = 0 if exact else 1e-12
    for i in range(TRIALS):
        x, y, z = pts[3 * i], pts[3 * i + 1], pts[3 * i + 2]
        if i % 7 == 0:
            y = x
        dxy, dyx = space.distance(x, y), space.distance(y, x)
        assert dxy == dyx
        assert dxy >= 0
        assert (dxy == 0) == _eq(space, x, y)
        assert space.distance(x, z) <= dxy + space.distance(y, z) + slack


@pytest.mark.parametrize("kind", sorted(SPACES))
def test_cross_matches_pairwise(kind):
    space = SPACES[kind]
    rng = np.random.default_rng(1)
    pts = [sample_point(space, rng) for _ in range(12)]
    arr = space.to_array(pts)
    D = space.cross(arr, arr)
    for i, j in itertools.product(range(12), repeat=2):
        assert D[i, j] == pytest.approx(float(space.distance(pts[i], pts[j])), abs=1e-12)


def test_distance_examples():
    plu = Plurality(("Alice", "Bob"))
    assert distance(plu, "Alice", "Bob") == 1
    assert distance(plu, "Alice", "Alice") == 0
    assert distance(plu, VACANT, "Bob") == 1
    perm = Permutations(3, ("g", "w", "q"))
    assert perm.distance(perm.decode_point(["g", "w", "q"]), perm.decode_point(["w", "g", "q"])) == 1
    sub = Subsets(("a", "b", "c", "d"))
    assert sub.distance(frozenset("abc"), frozenset("acd")) == 2
    strings = Strings("abc", 4)
    assert strings.distance("ab", "ba") == Fraction(1, 16)
    assert strings.distance("ab", "abc") == 1
    assert Scalar1D().distance(10, 18) == 8
    assert Simplex(3).distance((1, 0, 0), (0, 1, 0)) == pytest.approx(math.sqrt(2))


def test_kind_mismatch_raises():
    with pytest.raises(PointSpaceMismatch):
        Simplex(3).distance((0.5, 0.5), (1, 0, 0))
    with pytest.raises(PointSpaceMismatch):
        Subsets(("a", "b")).distance("ab", frozenset("a"))
    with pytest.raises(PointSpaceMismatch):
        Permutations(3).distance((0, 1, 2), "abc")


def test_validation_examples():
    assert validate_point(Simplex(3), (0.5, 0.5, 0.0)) == []
    assert "negative entry" in validate_point(Simplex(3), (0.6, 0.6, -0.2))
    assert "not a bijection" in validate_point(Permutations(3), (1, 1, 3))
    assert validate_point(Simplex(3), (0.5, 0.5, 1e-10)) == []
    assert validate_point(Simplex(3), (0.5, 0.5, 1e-8)) != []
    assert validate_point(Plurality(("a",)), VACANT) == []
    assert validate_point(Plurality(("a",)), "z") != []
    assert validate_point(Strings("ab", 3), "abab") != []
    assert validate_point(Strings("ab", 3), "abc") != []
    assert validate_point(Subsets(("a", "b"), 1), frozenset("ab")) != []


def test_simplex_normalize_is_explicit():
    x = (0.34, 0.40, 0.27)
    assert validate_point(Simplex(3), x) != []
    y = Simplex.normalize(x)
    assert validate_point(Simplex(3), y) == []


def test_enumeration_counts(star):
    assert len(list(enumerate_space(Subsets(("a", "b", "c"))))) == 8
    perms = list(enumerate_space(Permutations(4)))
    assert len(perms) == 24 and perms == sorted(perms)
    assert list(enumerate_space(star)) == ["h", "l1", "l2", "l3"]
    assert len(list(enumerate_space(Plurality(("a", "b"))))) == 3
    subsets = list(enumerate_space(Subsets(("a", "b", "c"))))
    masks = [Subsets(("a", "b", "c")).mask(x) for x in subsets]
    assert masks == sorted(masks)
    strings = list(enumerate_space(Strings("ab", 5), max_length=2))
    assert strings == ["", "a", "b", "aa", "ab", "ba", "bb"]
    with pytest.raises(SpaceNotEnumerable):
        list(enumerate_space(Simplex(3)))
    with pytest.raises(SpaceNotEnumerable):
        list(enumerate_space(Scalar1D(0, 1)))


def _bfs_swap(m):
    start = tuple(range(m))
    dist = {start: 0}
    queue = deque([start])
    while queue:
        p = queue.popleft()
        for i in range(m - 1):
            q = list(p)
            q[i], q[i + 1] = q[i + 1], q[i]
            q = tuple(q)
            if q not in dist:
                dist[q] = dist[p] + 1
                queue.append(q)
    return dist


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_swap_distance_matches_bfs(m):
    space = Permutations(m)
    from_identity = _bfs_swap(m)
    perms = list(itertools.permutations(range(m)))
    for p in perms:
        # relabel so that p becomes the identity; BFS distance is label-invariant
        pos = {v: i for i, v in enumerate(p)}
        for q in perms[:40]:
            rel = tuple(pos[v] for v in q)
            assert space.distance(p, q) == from_identity[rel]
            assert count_inversions(rel) == from_identity[rel]


def _edit_graph(alphabet, max_len):
    words = [""] + ["".join(w) for n in range(1, max_len + 1) for w in itertools.product(alphabet, repeat=n)]
    index = {w: i for i, w in enumerate(words)}
    swap = 1.0 / 16
    edges = {}

    def edge(a, b, cost):
        key = (index[a], index[b])
        edges[key] = min(cost, edges.get(key, cost))

    for w in words:
        for k in range(len(w)):
            edge(w, w[:k] + w[k + 1:], 1.0)
        if len(w) < max_len:
            for k in range(len(w) + 1):
                for a in alphabet:
                    edge(w, w[:k] + a + w[k:], 1.0)
        for k in range(len(w) - 1):
            if w[k] != w[k + 1]:
                edge(w, w[:k] + w[k + 1] + w[k] + w[k + 2:], swap)
    n = len(words)
    (rows, cols), vals = zip(*edges) if edges else ((), ()), list(edges.values())
    return words, index, coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def test_weighted_levenshtein_matches_script_search():
    # every edit script over strings up to length 5 is a path in this graph
    words, index, graph = _edit_graph("abc", 5)
    short = [w for w in words if len(w) <= 4]
    src = [index[w] for w in short]
    D = shortest_path(graph, method="D", indices=src)
    space = Strings("abc", 4)
    for a, i in zip(short, range(len(short))):
        for b in short:
            assert float(space.distance(a, b)) == pytest.approx(D[i, index[b]], abs=1e-12), (a, b)


def test_edit_script_realises_distance():
    space = Strings("abc", 4)
    rng = np.random.default_rng(3)
    for _ in range(500):
        a, b = sample_point(space, rng), sample_point(space, rng)
        script = space.edit_script(a, b)
        assert space.apply_script(a, script) == b
        cost = sum(space.swap_cost if op == "swap" else 1 for op, _, _ in script)
        assert cost == space.distance(a, b)


def test_midpoint_examples(star):
    assert midpoint_candidates(Scalar1D(), 10, 20, 8) == [15]
    assert midpoint_candidates(Simplex(3), (1, 0, 0), (0, 1, 0), 8) == [(0.5, 0.5, 0.0)]
    assert midpoint_candidates(star, "l2", "l3", 8) == ["h"]
    sub = Subsets(("a", "b", "c"))
    p, q = frozenset("ab"), frozenset("bc")
    cands = midpoint_candidates(sub, p, q, 4)
    assert 1 <= len(cands) <= 4
    for x in cands:
        assert frozenset("b") <= x <= frozenset("abc")
        assert abs(sub.distance(p, x) - sub.distance(q, x)) <= 1
    with pytest.raises(DegeneratePair):
        midpoint_candidates(Scalar1D(), 3, 3, 8)


@settings(max_examples=300, deadline=None)
@given(kind=st.sampled_from(sorted(SPACES)), seed=st.integers(0, 2**32 - 1), cap=st.integers(1, 8))
def test_midpoints_lie_between(kind, seed, cap):
    space = SPACES[kind]
    rng = np.random.default_rng(seed)
    p, q = sample_point(space, rng), sample_point(space, rng)
    d = space.distance(p, q)
    if d == 0:
        return
    cands = midpoint_candidates(space, p, q, cap)
    assert len(cands) <= cap
    slack = 0 if space.exact else 1e-9
    for c in cands:
        assert space.is_valid(c)
        assert space.distance(p, c) + space.distance(c, q) <= d + slack
        assert space.distance(p, c) < d and space.distance(q, c) < d


def test_midpoints_exist_when_interval_is_proper():
    # permutations and subsets at distance >= 2 always have a proper intermediate point
    rng = np.random.default_rng(5)
    for space in (Permutations(5), Subsets(tuple("abcdef"))):
        for _ in range(300):
            p, q = sample_point(space, rng), sample_point(space, rng)
            if space.distance(p, q) >= 2:
                assert midpoint_candidates(space, p, q, 8)


def test_table_validation():
    with pytest.raises(InvalidSpace):
        FiniteTable(("a", "b", "c"), ((0, 1, 5), (1, 0, 1), (5, 1, 0)))
    with pytest.raises(InvalidSpace):
        FiniteTable(("a", "b"), ((0, 1), (2, 0)))
    with pytest.raises(InvalidSpace):
        FiniteTable(("a", "b"), ((0, 0), (0, 0)))


@pytest.mark.parametrize("kind", sorted(SPACES))
def test_descriptor_round_trip(kind):
    space = SPACES[kind]
    doc = json.loads(json.dumps(space.to_dict()))
    again = space_from_dict(doc)
    rng = np.random.default_rng(9)
    for _ in range(50):
        x, y = sample_point(space, rng), sample_point(space, rng)
        raw = json.loads(json.dumps(space.encode_point(x), ensure_ascii=False))
        assert _eq(space, again.decode_point(raw), x)
        assert again.distance(x, y) == space.distance(x, y)


def test_unknown_space_kind():
    with pytest.raises(InvalidSpace):
        space_from_dict({"kind": "torus"})


@pytest.mark.parametrize("kind", sorted(SPACES))
def test_sorted_is_canonical(kind):
    space = SPACES[kind]
    rng = np.random.default_rng(2)
    pts = [sample_point(space, rng) for _ in range(30)]
    out = space.sorted(pts)
    keys = [space.sort_key(p) for p in out]
    assert keys == sorted(keys)


def test_canonical_orders():
    assert Plurality(("b", "a")).sorted(["a", VACANT, "b"]) == [VACANT, "b", "a"]
    assert Strings("ab", 3).sorted(["b", "aa", "", "a"]) == ["", "a", "b", "aa"]
    assert Simplex(2).sorted([(0.6, 0.4), (0.4, 0.6)]) == [(0.4, 0.6), (0.6, 0.4)]
