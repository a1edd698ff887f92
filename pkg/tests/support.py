"""Shared generators and independent oracles for the test suite."""

from __future__ import annotations

import random
from itertools import combinations
from math import gcd

import sympy
from hypothesis import assume
from hypothesis import strategies as st

from torichk.lattice_core import SubtorusSpec


def is_valid(U: list[list[int]], n: int, d: int) -> bool:
    cols = [[U[i][k] for i in range(n)] for k in range(d)]
    if any(gcd(*c) != 1 for c in cols):
        return False
    return sympy.Matrix(U).rank() == n


def random_specs(count: int, seed: int, dmax: int = 7, nmax: int = 4,
                 bound: int = 3) -> list[SubtorusSpec]:
    """Deterministic list of valid specs with small entries."""
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        d = rng.randint(1, dmax)
        n = rng.randint(1, min(nmax, d))
        U = [[rng.randint(-bound, bound) for _ in range(d)] for _ in range(n)]
        if is_valid(U, n, d):
            out.append(SubtorusSpec(d, n, tuple(map(tuple, U))))
    return out


def _primitive(col: list[int]) -> list[int] | None:
    g = gcd(*col)
    return None if g == 0 else [x // g for x in col]


@st.composite
def specs(draw, dmax: int = 5, nmax: int = 3, bound: int = 3):
    """Valid specs; columns are made primitive by dividing out their gcd."""
    d = draw(st.integers(1, dmax))
    n = draw(st.integers(1, min(nmax, d)))
    column = st.lists(st.integers(-bound, bound), min_size=n, max_size=n).filter(any)
    cols = draw(st.lists(column.map(_primitive), min_size=d, max_size=d))
    U = [[cols[k][i] for k in range(d)] for i in range(n)]
    assume(sympy.Matrix(U).rank() == n)
    return SubtorusSpec(d, n, tuple(map(tuple, U)))


def minors_oracle(spec: SubtorusSpec) -> list[tuple[frozenset, int]]:
    """All n x n column minors via sympy, lexicographic subset order."""
    M = sympy.Matrix(spec.U)
    out = []
    for sub in combinations(range(spec.d), spec.n):
        out.append((frozenset(k + 1 for k in sub), int(M[:, list(sub)].det())))
    return out


def unimodular_oracle(spec: SubtorusSpec) -> bool:
    return all(det in (0, 1, -1) for _, det in minors_oracle(spec))


def ac_oracle(spec: SubtorusSpec) -> bool:
    return all(det in (1, -1) for _, det in minors_oracle(spec))


def calabi_spec(n: int) -> SubtorusSpec:
    """U = [I_n | -(1,...,1)], the Calabi family on T*CP^n."""
    U = [[1 if j == i else 0 for j in range(n)] + [-1] for i in range(n)]
    return SubtorusSpec(n + 1, n, tuple(map(tuple, U)))


def trivial_spec(d: int) -> SubtorusSpec:
    return SubtorusSpec(d, d, tuple(tuple(int(i == j) for j in range(d)) for i in range(d)))


# GL(2, Z) word search

GENERATORS = ((1, 1, 0, 1), (1, -1, 0, 1), (0, 1, 1, 0), (-1, 0, 0, 1))


def _mul(a, b):
    return (a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3])


def gl2_words(max_len: int) -> list[tuple[int, int, int, int]]:
    """All matrices reachable by words of length <= max_len, up to sign."""
    seen = {(1, 0, 0, 1)}
    frontier = [(1, 0, 0, 1)]
    for _ in range(max_len):
        nxt = []
        for m in frontier:
            for g in GENERATORS:
                p = _mul(g, m)
                key = p if (p[0], p[1]) > (0, 0) or (p[0] == 0 and p[1] > 0) else tuple(-x for x in p)
                if key not in seen:
                    seen.add(key)
                    nxt.append(key)
        frontier = nxt
    return sorted(seen)


def _apply(m, x: float) -> float:
    den = m[2] * x + m[3]
    return float("inf") if den == 0 else (m[0] * x + m[1]) / den


def bfs_equivalent(alpha: float, beta: float, words, tol: float = 1e-9) -> bool:
    """Meet in the middle: A(alpha) = B(beta) with both words from ``words``."""
    left = sorted(_apply(m, alpha) for m in words)
    right = sorted(_apply(m, beta) for m in words)
    left = [v for v in left if abs(v) < 1e6]
    right = [v for v in right if abs(v) < 1e6]
    i = j = 0
    while i < len(left) and j < len(right):
        a, b = left[i], right[j]
        if abs(a - b) <= tol * max(1.0, abs(a)):
            return True
        if a < b:
            i += 1
        else:
            j += 1
    return False
