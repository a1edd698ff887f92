"""Codimension-3 hyperplane arrangement of a level lift and its smoothness test.

For each column u_k and rational triple tau_k the affine subspace

    H_k = { s in R^3 (x) (R^n)^* : <s, u_k> = tau_k }

has codimension 3.  The three coordinates of s decouple, so every question
about intersections reduces to three rational linear systems sharing the
coefficient matrix formed by the u_k.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

from .errors import ExhaustedAttempts, PreconditionFailed, ShapeMismatch
from .lattice_core import (
    IndexSubset,
    SubtorusSpec,
    as_fraction,
    check_hypothesis_unimodular,
    determinant,
    kernel_sublattice,
    rational_rref,
)

Triple = tuple[Fraction, Fraction, Fraction]


@dataclass(frozen=True)
class ZetaLift:
    """Rational lift tau = (tau_1, ..., tau_d) of a level, tau_k in Q^3."""

    tau: tuple[Triple, ...]

    def __post_init__(self) -> None:
        rows = []
        for t in self.tau:
            if len(t) != 3:
                raise ShapeMismatch(f"tau entry {t!r} is not a triple")
            rows.append(tuple(as_fraction(x) for x in t))
        object.__setattr__(self, "tau", tuple(rows))

    @classmethod
    def zero(cls, d: int) -> "ZetaLift":
        return cls(tuple((0, 0, 0) for _ in range(d)))

    @property
    def d(self) -> int:
        return len(self.tau)

    def zeta(self, spec: SubtorusSpec) -> list[Triple]:
        """Coordinates of the level in the canonical kernel basis.

        Entry j is sum_k b_j[k] * tau_k for the j-th canonical generator b_j.
        """
        _check(spec, self)
        out = []
        for b in kernel_sublattice(spec).basis:
            out.append(tuple(sum((b[k] * self.tau[k][c] for k in range(spec.d)), Fraction(0))
                             for c in range(3)))
        return out

    def translated(self, spec: SubtorusSpec, s: Sequence[Sequence[object]]) -> "ZetaLift":
        """tau_k + <s, u_k> for s given as n rows of triples."""
        cols = spec.columns
        sf = [[as_fraction(x) for x in row] for row in s]
        return ZetaLift(tuple(
            tuple(self.tau[k][c] + sum(sf[i][c] * cols[k][i] for i in range(spec.n))
                  for c in range(3))
            for k in range(spec.d)))

    def scaled(self, lam: Fraction) -> "ZetaLift":
        return ZetaLift(tuple(tuple(lam * x for x in t) for t in self.tau))

    def permuted(self, perm: Sequence[int]) -> "ZetaLift":
        return ZetaLift(tuple(self.tau[p] for p in perm))


@dataclass(frozen=True)
class FlatSolution:
    """Result of intersecting a family of hyperplanes.

    ``point`` is one rational solution given as n rows (s_i in Q^3).
    """

    empty: bool
    dim: int | None
    point: tuple[Triple, ...] | None


@dataclass(frozen=True)
class SmoothnessVerdict:
    distinct: bool
    excess_flat: IndexSubset | None
    bad_flat: IndexSubset | None
    smooth: bool
    coincident: tuple[int, int] | None = None


def _check(spec: SubtorusSpec, tau: ZetaLift) -> None:
    if tau.d != spec.d:
        raise ShapeMismatch(f"tau has {tau.d} entries, spec has d={spec.d}")


def hyperplane_solve(spec: SubtorusSpec, tau: ZetaLift, S: Iterable[int]) -> FlatSolution:
    """Intersect the hyperplanes H_k for k in S (1-based) over Q."""
    _check(spec, tau)
    idx = sorted(set(S))
    if not idx:
        raise PreconditionFailed("S must be nonempty")
    n = spec.n
    cols = spec.columns
    rows = [list(cols[k - 1]) + list(tau.tau[k - 1]) for k in idx]
    red, piv = rational_rref(rows, pivot_cols=n)
    r = len(piv)
    for row in red[r:]:
        if any(row[n:]):
            return FlatSolution(True, None, None)
    point = [[Fraction(0)] * 3 for _ in range(n)]
    for i, c in enumerate(piv):
        point[c] = list(red[i][n:])
    return FlatSolution(False, 3 * (n - r), tuple(tuple(p) for p in point))


def _same_hyperplane(u: Sequence[int], t: Triple, v: Sequence[int], s: Triple) -> bool:
    # primitive vectors: H_j = H_k iff (u_j, tau_j) = +-(u_k, tau_k)
    if tuple(u) == tuple(v) and t == s:
        return True
    return tuple(-x for x in u) == tuple(v) and tuple(-x for x in t) == s


def smoothness_check(spec: SubtorusSpec, tau: ZetaLift) -> SmoothnessVerdict:
    """Exact smoothness criterion for the quotient at the level tau.

    Smooth iff the hyperplanes are pairwise distinct, no n + 1 of them share
    a point, and any n of them that do share a point have u's forming a
    Z-basis.  Witnesses are lexicographically least subsets (1-based).
    """
    _check(spec, tau)
    cols = spec.columns
    n, d = spec.n, spec.d
    coincident = None
    for j, k in combinations(range(d), 2):
        if _same_hyperplane(cols[j], tau.tau[j], cols[k], tau.tau[k]):
            coincident = (j + 1, k + 1)
            break
    distinct = coincident is None

    excess = None
    for sub in combinations(range(1, d + 1), n + 1):
        if not hyperplane_solve(spec, tau, sub).empty:
            excess = frozenset(sub)
            break

    bad = None
    for sub in combinations(range(1, d + 1), n):
        det = determinant([[cols[k - 1][i] for k in sub] for i in range(n)])
        if det in (1, -1):
            continue
        if not hyperplane_solve(spec, tau, sub).empty:
            bad = frozenset(sub)
            break

    return SmoothnessVerdict(distinct, excess, bad,
                             distinct and excess is None and bad is None, coincident)


def sample_generic_zeta(spec: SubtorusSpec, seed: int, bound: int = 10,
                        max_attempts: int = 1000) -> tuple[ZetaLift, SmoothnessVerdict]:
    """Draw integer lifts uniformly in [-bound, bound] until one is smooth.

    Raises:
        PreconditionFailed: if ``spec`` violates the unimodularity hypothesis,
            in which case no level is smooth.
        ExhaustedAttempts: after ``max_attempts`` rejected draws.
    """
    if not check_hypothesis_unimodular(spec).holds:
        raise PreconditionFailed("spec fails the unimodularity hypothesis; no level is smooth")
    if bound < 1:
        raise PreconditionFailed("bound must be positive")
    rng = random.Random(seed)
    for _ in range(max_attempts):
        tau = ZetaLift(tuple(tuple(rng.randint(-bound, bound) for _ in range(3))
                             for _ in range(spec.d)))
        verdict = smoothness_check(spec, tau)
        if verdict.smooth:
            return tau, verdict
    raise ExhaustedAttempts(f"no smooth level found in {max_attempts} draws (bound {bound})")
