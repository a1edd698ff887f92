from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from math import gcd

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from support import ac_oracle, calabi_spec, minors_oracle, specs, trivial_spec, unimodular_oracle
from torichk.errors import ShapeMismatch, SigmaZero
from torichk.lattice_core import (
    RealSymbol,
    SigmaSpec,
    Sublattice,
    SubtorusSpec,
    as_fraction,
    check_ac_condition,
    check_hypothesis_unimodular,
    determinant,
    hermite_rows,
    integer_kernel,
    kernel_sublattice,
    rank,
    rational_rref,
    saturate,
    sigma_analysis,
    squarefree_part,
    stabilizer_dimension,
    validate_subtorus_spec,
)

FOUR_COL = SubtorusSpec(4, 2, ((1, 1, 0, 1), (0, 0, 1, 1)))

matrices = st.integers(1, 5).flatmap(
    lambda m: st.lists(st.lists(st.integers(-6, 6), min_size=m, max_size=m), min_size=m, max_size=m))


def _minor_gcd_oracle(basis) -> int:
    M = sympy.Matrix(basis)
    r, amb = M.shape
    g = 0
    for cols in combinations(range(amb), r):
        g = gcd(g, int(M[:, list(cols)].det()))
    return g


# exact primitives

@given(matrices)
def test_determinant_matches_sympy(rows):
    assert determinant(rows) == int(sympy.Matrix(rows).det())


@given(st.lists(st.lists(st.integers(-4, 4), min_size=4, max_size=4), min_size=1, max_size=5))
def test_rank_matches_sympy(rows):
    assert rank(rows) == sympy.Matrix(rows).rank()


def test_rref_matches_sympy():
    rows = [[2, 4, 1], [1, 2, 3], [0, 0, 5]]
    red, piv = rational_rref(rows)
    ref, sp_piv = sympy.Matrix(rows).rref()
    assert piv == list(sp_piv)
    assert [[sympy.Rational(x.numerator, x.denominator) for x in r] for r in red] == ref.tolist()


def test_as_fraction_refuses_floats():
    with pytest.raises(TypeError):
        as_fraction(0.5)
    assert as_fraction("3/6") == Fraction(1, 2)


@given(st.lists(st.lists(st.integers(-4, 4), min_size=5, max_size=5), min_size=1, max_size=3))
def test_integer_kernel_is_saturated_kernel(rows):
    ker = integer_kernel(rows, 5)
    M = sympy.Matrix(rows)
    assert len(ker) == 5 - M.rank()
    for b in ker:
        assert all(x == 0 for x in M * sympy.Matrix(b))
    if ker:
        assert _minor_gcd_oracle(ker) == 1


@given(st.lists(st.lists(st.integers(-5, 5), min_size=4, max_size=4), min_size=1, max_size=3),
       st.lists(st.integers(-3, 3), min_size=3, max_size=3))
def test_hermite_form_is_canonical(gens, mix):
    # an invertible integer change of generators must not change the form
    h = hermite_rows(gens, 4)
    moved = [list(g) for g in gens]
    if len(moved) > 1:
        moved[0] = [a + mix[0] * b for a, b in zip(moved[0], moved[1])]
        moved.reverse()
    moved = [[-x for x in moved[0]]] + moved[1:]
    assert hermite_rows(moved, 4) == h
    assert hermite_rows(h, 4) == h


def test_saturate_divides_out_index():
    assert saturate([(2, 4, 6)], 3) == [(1, 2, 3)]
    lat = Sublattice.from_generators(3, [(2, 0, 0), (0, 2, 0)])
    assert lat.basis == ((1, 0, 0), (0, 1, 0))
    raw = Sublattice.from_generators(3, [(2, 0, 0)], saturate_first=False)
    assert not raw.is_saturated()


# SubtorusSpec validation

def test_validate_examples():
    assert validate_subtorus_spec(trivial_spec(2)).valid
    assert validate_subtorus_spec(calabi_spec(2)).valid
    bad = validate_subtorus_spec(SubtorusSpec(2, 2, ((2, 0), (0, 1))))
    assert not bad.valid and bad.non_primitive == (1,)


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        SubtorusSpec(3, 2, ((1, 0), (0, 1)))
    with pytest.raises(ShapeMismatch):
        SubtorusSpec(2, 3, ((1, 0), (0, 1), (1, 1)))


def test_rank_defect_reported():
    diag = validate_subtorus_spec(SubtorusSpec(3, 2, ((1, 1, 1), (1, 1, 1))))
    assert not diag.valid and diag.rank_defect == 1


# kernel

def test_kernel_calabi_is_diagonal():
    assert kernel_sublattice(calabi_spec(2)).basis == ((1, 1, 1),)


def test_kernel_identity_is_zero():
    assert kernel_sublattice(trivial_spec(3)).rank == 0


def test_kernel_four_columns():
    lat = kernel_sublattice(FOUR_COL)
    assert lat.rank == 2
    assert lat.contains((1, -1, 0, 0)) and lat.contains((1, 0, 1, -1))
    assert lat.is_saturated()
    for b in lat.basis:
        assert all(sum(r[k] * b[k] for k in range(4)) == 0 for r in FOUR_COL.U)


@settings(max_examples=60)
@given(specs())
def test_kernel_properties(spec):
    lat = kernel_sublattice(spec)
    assert lat.rank == spec.d - spec.n
    for b in lat.basis:
        assert all(sum(r[k] * b[k] for k in range(spec.d)) == 0 for r in spec.U)
    if lat.basis:
        assert _minor_gcd_oracle(lat.basis) == 1
    assert lat.canonical() == lat


# unimodularity criteria

def test_unimodular_examples():
    for n in range(1, 6):
        assert check_hypothesis_unimodular(calabi_spec(n)).holds
        assert check_ac_condition(calabi_spec(n)).holds
    v = check_hypothesis_unimodular(SubtorusSpec(3, 2, ((1, 0, 1), (0, 1, 2))))
    assert not v.holds and v.witness == frozenset({1, 3}) and v.det == 2
    assert check_hypothesis_unimodular(trivial_spec(3)).holds


def test_ac_four_columns_fails_on_dependent_pair():
    v = check_ac_condition(FOUR_COL)
    assert not v.holds and v.witness == frozenset({1, 2}) and v.det == 0
    assert check_hypothesis_unimodular(FOUR_COL).holds


@settings(max_examples=80)
@given(specs())
def test_criteria_match_minor_oracle(spec):
    u = check_hypothesis_unimodular(spec)
    a = check_ac_condition(spec)
    assert u.holds == unimodular_oracle(spec)
    assert a.holds == ac_oracle(spec)
    if a.holds:
        assert u.holds
    minors = dict(minors_oracle(spec))
    if not u.holds:
        first = next(s for s, det in minors_oracle(spec) if det not in (0, 1, -1))
        assert u.witness == first and u.det == minors[first]


# stabilizers

def test_stabilizer_examples():
    assert stabilizer_dimension(calabi_spec(2), [1])[0] == 0
    assert stabilizer_dimension(FOUR_COL, [])[0] == 2
    dim, lat = stabilizer_dimension(FOUR_COL, [3, 4])
    assert dim == 1 and lat.basis == ((1, -1, 0, 0),)


@settings(max_examples=40)
@given(specs(dmax=5), st.data())
def test_stabilizer_antitone(spec, data):
    I = data.draw(st.sets(st.integers(1, spec.d)))
    J = I | data.draw(st.sets(st.integers(1, spec.d)))
    assert stabilizer_dimension(spec, J)[0] <= stabilizer_dimension(spec, I)[0]


def test_stabilizer_rejects_bad_index():
    with pytest.raises(ShapeMismatch):
        stabilizer_dimension(FOUR_COL, [5])


# sigma analysis

def test_squarefree_part():
    assert squarefree_part(12) == (2, 3)
    assert squarefree_part(7) == (1, 7)
    assert squarefree_part(72) == (6, 2)


def test_symbol_values():
    s = RealSymbol("sqrt(2)")
    assert s.radicand == 2 and abs(float(s.decimal) - 2 ** 0.5) < 1e-15
    with pytest.raises(ValueError):
        RealSymbol("pi")
    with pytest.raises(ValueError):
        SigmaSpec.over(["1", "sqrt(8)"], [[1, 0]])


def test_sigma_irrational_pair():
    info = sigma_analysis(trivial_spec(2), SigmaSpec.over(["1", "sqrt(2)"], [[1, 0], [0, 1]]))
    assert info.I_sigma == frozenset() and info.dim_T_sigma == 2
    assert info.dim_T_sigma_cap_N == 0 and info.transversal


def test_sigma_diagonal_and_rational():
    assert sigma_analysis(trivial_spec(4), SigmaSpec.rational([1, 1, 1, 1])).dim_T_sigma == 1
    info = sigma_analysis(trivial_spec(2), SigmaSpec.rational([2, 4]))
    assert info.dim_T_sigma == 1 and info.annihilator.basis == ((2, -1),)


def test_sigma_inside_N_is_not_transversal():
    info = sigma_analysis(calabi_spec(2), SigmaSpec.rational([1, 1, 1]))
    assert not info.transversal and info.dim_T_sigma_cap_N == 1


def test_sigma_zero_rejected():
    with pytest.raises(SigmaZero):
        sigma_analysis(trivial_spec(2), SigmaSpec.rational([0, 0]))


@settings(max_examples=40)
@given(specs(dmax=4), st.lists(st.integers(-3, 3), min_size=4, max_size=4),
       st.lists(st.integers(-3, 3), min_size=4, max_size=4), st.integers(1, 5))
def test_sigma_bounds_and_scaling(spec, c1, c2, lam):
    sigma = SigmaSpec.over(["1", "sqrt(3)"], [[c1[p], c2[p]] for p in range(spec.d)])
    if sigma.is_zero():
        return
    info = sigma_analysis(spec, sigma)
    assert 1 <= info.dim_T_sigma <= spec.d
    assert info.dim_T_sigma <= 2
    if info.transversal:
        assert info.dim_T_sigma_cap_N < info.dim_T_sigma
    scaled = sigma_analysis(spec, sigma.scaled(Fraction(lam, 7)))
    assert (scaled.I_sigma, scaled.dim_T_sigma, scaled.dim_T_sigma_cap_N) == \
        (info.I_sigma, info.dim_T_sigma, info.dim_T_sigma_cap_N)
