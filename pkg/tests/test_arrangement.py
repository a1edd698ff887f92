from __future__ import annotations

from fractions import Fraction
from itertools import combinations

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from support import calabi_spec, specs, trivial_spec
from torichk.arrangement import (
    ZetaLift,
    hyperplane_solve,
    sample_generic_zeta,
    smoothness_check,
)
from torichk.errors import PreconditionFailed, ShapeMismatch
from torichk.lattice_core import SubtorusSpec, kernel_sublattice

CON5 = calabi_spec(2)
EH = SubtorusSpec(2, 1, ((1, 1),))

rationals = st.fractions(min_value=-5, max_value=5, max_denominator=4)


def taus(d: int):
    return st.lists(st.tuples(rationals, rationals, rationals), min_size=d, max_size=d).map(
        lambda t: ZetaLift(tuple(t)))


def _system(spec, tau, S):
    A = sympy.Matrix([list(spec.column(k)) for k in S])
    B = sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in tau.tau[k - 1]] for k in S])
    return A, B


def solve_oracle(spec, tau, S):
    """(empty, dim) from rank comparison on each of the three components."""
    A, B = _system(spec, tau, S)
    r = A.rank()
    if any(A.row_join(B[:, c]).rank() > r for c in range(3)):
        return True, None
    return False, 3 * (spec.n - r)


def smooth_oracle(spec, tau) -> bool:
    d, n = spec.d, spec.n
    for j, k in combinations(range(1, d + 1), 2):
        empty, dim = solve_oracle(spec, tau, [j, k])
        if not empty and dim == 3 * n - 3:
            return False
    for S in combinations(range(1, d + 1), n + 1):
        if not solve_oracle(spec, tau, S)[0]:
            return False
    for S in combinations(range(1, d + 1), n):
        A, _ = _system(spec, tau, S)
        if abs(A.det()) != 1 and not solve_oracle(spec, tau, S)[0]:
            return False
    return True


def test_single_hyperplane_dimension():
    tau = ZetaLift(((1, 2, 3), (0, 0, 0), (5, 5, 5)))
    sol = hyperplane_solve(CON5, tau, [2])
    assert not sol.empty and sol.dim == 3 * 2 - 3


def test_zero_level_contains_origin():
    sol = hyperplane_solve(CON5, ZetaLift.zero(3), [1, 2, 3])
    assert not sol.empty and sol.point == ((0, 0, 0), (0, 0, 0))


def test_calabi_triple_is_empty():
    tau = ZetaLift(((0, 0, 0), (0, 0, 0), (1, 0, 0)))
    assert hyperplane_solve(CON5, tau, [1, 2, 3]).empty
    assert solve_oracle(CON5, tau, [1, 2, 3])[0]


def test_solution_point_satisfies_equations():
    tau = ZetaLift(((1, 0, 2), (Fraction(1, 3), 1, 0), (0, 0, 0)))
    sol = hyperplane_solve(CON5, tau, [1, 2])
    for k in (1, 2):
        u = CON5.column(k)
        for c in range(3):
            assert sum(sol.point[i][c] * u[i] for i in range(2)) == tau.tau[k - 1][c]


def test_empty_subset_rejected():
    with pytest.raises(PreconditionFailed):
        hyperplane_solve(CON5, ZetaLift.zero(3), [])


def test_shape_checked():
    with pytest.raises(ShapeMismatch):
        smoothness_check(CON5, ZetaLift.zero(2))


@settings(max_examples=60, deadline=None)
@given(specs(dmax=6, nmax=3), st.data())
def test_solve_matches_oracle(spec, data):
    tau = data.draw(taus(spec.d))
    for r in range(1, spec.d + 1):
        for S in combinations(range(1, spec.d + 1), r):
            sol = hyperplane_solve(spec, tau, S)
            assert (sol.empty, sol.dim) == solve_oracle(spec, tau, S)


def test_zero_level_singular():
    v = smoothness_check(CON5, ZetaLift.zero(3))
    assert not v.smooth and v.excess_flat == frozenset({1, 2, 3})


def test_eguchi_hanson_smooth():
    assert smoothness_check(EH, ZetaLift(((1, 0, 0), (0, 0, 0)))).smooth


def test_calabi_level_smooth():
    tau = ZetaLift(((0, 0, 0), (1, 0, 0), (0, 1, 0)))
    assert smoothness_check(CON5, tau).smooth
    assert kernel_sublattice(CON5).basis == ((1, 1, 1),)
    assert tau.zeta(CON5) == [(1, 1, 0)]


def test_coincident_hyperplanes():
    v = smoothness_check(EH, ZetaLift(((1, 2, 3), (1, 2, 3))))
    assert not v.distinct and v.coincident == (1, 2)
    opp = SubtorusSpec(2, 1, ((1, -1),))
    assert not smoothness_check(opp, ZetaLift(((1, 2, 3), (-1, -2, -3)))).distinct


def test_bad_flat_witness():
    spec = SubtorusSpec(3, 2, ((1, 0, 1), (0, 1, 2)))
    v = smoothness_check(spec, ZetaLift(((0, 0, 0), (1, 1, 1), (0, 0, 0))))
    assert v.bad_flat == frozenset({1, 3})


@settings(max_examples=60, deadline=None)
@given(specs(dmax=5, nmax=3), st.data())
def test_smoothness_matches_oracle(spec, data):
    tau = data.draw(taus(spec.d))
    assert smoothness_check(spec, tau).smooth == smooth_oracle(spec, tau)


@settings(max_examples=40, deadline=None)
@given(specs(dmax=5, nmax=3), st.data())
def test_translation_and_scaling_invariance(spec, data):
    tau = data.draw(taus(spec.d))
    s = data.draw(st.lists(st.tuples(rationals, rationals, rationals), min_size=spec.n, max_size=spec.n))
    lam = data.draw(st.fractions(min_value=Fraction(1, 10), max_value=10))
    base = smoothness_check(spec, tau).smooth
    assert smoothness_check(spec, tau.translated(spec, s)).smooth == base
    assert smoothness_check(spec, tau.scaled(lam)).smooth == base
    # translation does not move the level
    assert tau.translated(spec, s).zeta(spec) == tau.zeta(spec)


def test_sampler_deterministic_and_smooth():
    tau, verdict = sample_generic_zeta(CON5, seed=1, bound=10)
    assert verdict.smooth and smoothness_check(CON5, tau).smooth
    assert sample_generic_zeta(CON5, seed=1, bound=10)[0] == tau
    tau2, _ = sample_generic_zeta(trivial_spec(3), seed=5)
    assert smoothness_check(trivial_spec(3), tau2).smooth


def test_sampler_refuses_failing_hypothesis():
    with pytest.raises(PreconditionFailed):
        sample_generic_zeta(SubtorusSpec(3, 2, ((1, 0, 1), (0, 1, 2))), seed=0)
