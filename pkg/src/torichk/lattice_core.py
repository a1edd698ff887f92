"""Exact integer and rational linear algebra for subtorus data.

A subtorus N of the torus T^d is given by an n x d integer matrix U whose
columns u_1, ..., u_d are primitive and span Q^n.  The Lie algebra of N is
the kernel of U.  Everything here works with Python integers and
``fractions.Fraction``; no floating point is involved.

Index subsets exposed by the public API are 1-based, matching the usual
labelling u_1, ..., u_d of the columns.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

from .errors import NotTransversal, ShapeMismatch, SigmaZero

IntMatrix = tuple[tuple[int, ...], ...]
IndexSubset = frozenset[int]

# ---------------------------------------------------------------------------
# exact primitives


def _as_int(x: object) -> int:
    if isinstance(x, bool) or not isinstance(x, (int, str)):
        raise TypeError(f"expected an integer, got {x!r}")
    return int(x)


def as_fraction(x: object) -> Fraction:
    """Convert an int, Fraction or "p/q" string to a Fraction.

    Floats are refused: exactness downstream depends on it.
    """
    if isinstance(x, bool) or isinstance(x, float):
        raise TypeError(f"floating point value {x!r} refused, use an exact rational")
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot interpret {x!r} as a rational")


def determinant(rows: Sequence[Sequence[int]]) -> int:
    """Determinant of a square integer matrix by fraction-free elimination."""
    a = [list(r) for r in rows]
    m = len(a)
    if m == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(m - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, m) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, m):
            for j in range(k + 1, m):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[m - 1][m - 1]


def rational_rref(rows: Sequence[Sequence[object]],
                  pivot_cols: int | None = None) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form over Q; returns (matrix, pivot columns).

    With ``pivot_cols`` set, only the leading columns are eliminated, which
    turns trailing columns into right-hand sides.
    """
    a = [[as_fraction(x) for x in r] for r in rows]
    if not a:
        return a, []
    ncols = len(a[0]) if pivot_cols is None else pivot_cols
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(a)) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for i in range(len(a)):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == len(a):
            break
    return a, pivots


def rank(rows: Sequence[Sequence[object]]) -> int:
    """Rank over Q."""
    return len(rational_rref(rows)[1])


def _row_echelon(rows: list[list[int]], pivot_cols: int) -> tuple[list[list[int]], list[int]]:
    """Integer row Hermite normal form, pivoting only on the first columns.

    Row operations are unimodular, so extra trailing columns record the
    transformation when the input is augmented.
    """
    a = [list(r) for r in rows]
    m = len(a)
    pivots: list[int] = []
    r = 0
    for c in range(pivot_cols):
        if r == m:
            break
        while True:
            nz = [i for i in range(r, m) if a[i][c] != 0]
            if not nz:
                break
            i0 = min(nz, key=lambda i: abs(a[i][c]))
            a[r], a[i0] = a[i0], a[r]
            clean = True
            for i in range(r + 1, m):
                if a[i][c]:
                    q = a[i][c] // a[r][c]
                    a[i] = [x - q * y for x, y in zip(a[i], a[r])]
                    if a[i][c]:
                        clean = False
            if clean:
                break
        if a[r][c] == 0:
            continue
        if a[r][c] < 0:
            a[r] = [-x for x in a[r]]
        for i in range(r):
            q = a[i][c] // a[r][c]
            if q:
                a[i] = [x - q * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    return a, pivots


def hermite_rows(vectors: Iterable[Sequence[int]], ambient: int) -> tuple[tuple[int, ...], ...]:
    """Canonical Hermite basis (nonzero rows, positive pivots) of a lattice."""
    vecs = [list(map(int, v)) for v in vectors]
    if not vecs:
        return ()
    h, piv = _row_echelon(vecs, ambient)
    return tuple(tuple(h[i]) for i in range(len(piv)))


def integer_kernel(rows: Sequence[Sequence[int]], ncols: int) -> list[tuple[int, ...]]:
    """Basis of {x in Z^ncols : M x = 0}; automatically saturated."""
    m = len(rows)
    aug = [[rows[i][j] for i in range(m)] + [1 if k == j else 0 for k in range(ncols)]
           for j in range(ncols)]
    h, piv = _row_echelon(aug, m)
    return [tuple(h[i][m:]) for i in range(len(piv), ncols)]


def saturate(vectors: Sequence[Sequence[int]], ambient: int) -> list[tuple[int, ...]]:
    """Basis of (span_Q vectors) intersected with Z^ambient."""
    vecs = [list(v) for v in vectors if any(v)]
    if not vecs:
        return []
    ann = integer_kernel(vecs, ambient)
    if not ann:
        return [tuple(1 if i == j else 0 for i in range(ambient)) for j in range(ambient)]
    return integer_kernel(ann, ambient)


def _gcd_maximal_minors(vectors: Sequence[Sequence[int]], ambient: int) -> int:
    r = len(vectors)
    g = 0
    for rows in combinations(range(ambient), r):
        g = math.gcd(g, determinant([[v[i] for i in rows] for v in vectors]))
    return g


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class Sublattice:
    """A saturated sublattice of Z^ambient in canonical Hermite form.

    ``basis`` holds the generators (the columns of the basis matrix), each a
    tuple of length ``ambient``.  The generators are the nonzero rows of the
    row Hermite normal form of the transposed basis matrix, so two equal
    lattices always have identical ``basis``.
    """

    ambient: int
    basis: tuple[tuple[int, ...], ...]

    @classmethod
    def from_generators(cls, ambient: int, generators: Iterable[Sequence[int]],
                        saturate_first: bool = True) -> "Sublattice":
        gens = [tuple(int(x) for x in g) for g in generators]
        for g in gens:
            if len(g) != ambient:
                raise ShapeMismatch(f"generator {g} does not have length {ambient}")
        if saturate_first:
            gens = saturate(gens, ambient)
        return cls(ambient, hermite_rows(gens, ambient))

    @property
    def rank(self) -> int:
        return len(self.basis)

    def canonical(self) -> "Sublattice":
        return Sublattice(self.ambient, hermite_rows(self.basis, self.ambient))

    def is_saturated(self) -> bool:
        if not self.basis:
            return True
        return _gcd_maximal_minors(self.basis, self.ambient) == 1

    def contains(self, v: Sequence[int]) -> bool:
        """Membership of an integer vector in the lattice."""
        if not any(v):
            return True
        if not self.basis:
            return False
        # Hermite basis: peel off pivots greedily
        rest = list(v)
        for b in self.basis:
            p = next(i for i, x in enumerate(b) if x)
            if rest[p] % b[p]:
                return False
            q = rest[p] // b[p]
            rest = [x - q * y for x, y in zip(rest, b)]
        return not any(rest)

    def matrix(self) -> list[list[int]]:
        """Basis as an ambient x rank matrix (generators as columns)."""
        return [[b[i] for b in self.basis] for i in range(self.ambient)]


@dataclass(frozen=True)
class SubtorusSpec:
    """Integer data (d, n, U) of a subtorus N of T^d.

    ``U`` is stored row-major with n rows of length d; column k is u_k.
    Construction only checks the shape; use :func:`validate_subtorus_spec`
    for primitivity and rank.
    """

    d: int
    n: int
    U: IntMatrix

    def __post_init__(self) -> None:
        rows = tuple(tuple(_as_int(x) for x in r) for r in self.U)
        object.__setattr__(self, "U", rows)
        if not (isinstance(self.d, int) and isinstance(self.n, int)):
            raise ShapeMismatch("d and n must be integers")
        if len(rows) != self.n or any(len(r) != self.d for r in rows):
            raise ShapeMismatch(
                f"U has shape {len(rows)}x{len(rows[0]) if rows else 0}, expected {self.n}x{self.d}")
        if not 1 <= self.n <= self.d:
            raise ShapeMismatch(f"need 1 <= n <= d, got n={self.n}, d={self.d}")

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence[int]]) -> "SubtorusSpec":
        d = len(columns)
        n = len(columns[0])
        return cls(d, n, tuple(tuple(c[i] for c in columns) for i in range(n)))

    def column(self, k: int) -> tuple[int, ...]:
        """Column u_k, with k 1-based."""
        return tuple(r[k - 1] for r in self.U)

    @property
    def columns(self) -> tuple[tuple[int, ...], ...]:
        return tuple(self.column(k) for k in range(1, self.d + 1))

    @property
    def dim_N(self) -> int:
        return self.d - self.n

    def permuted(self, perm: Sequence[int]) -> "SubtorusSpec":
        """Spec with columns reordered: new column k is old column perm[k] (0-based)."""
        return SubtorusSpec(self.d, self.n, tuple(tuple(r[p] for p in perm) for r in self.U))


@dataclass(frozen=True)
class SpecDiagnostics:
    valid: bool
    non_primitive: tuple[int, ...]
    rank: int
    rank_defect: int
    messages: tuple[str, ...]


@dataclass(frozen=True)
class UnimodularVerdict:
    holds: bool
    witness: IndexSubset | None = None
    det: int | None = None


def validate_subtorus_spec(spec: SubtorusSpec) -> SpecDiagnostics:
    """Check primitivity of every column and that U has rank n."""
    bad = tuple(k for k, col in enumerate(spec.columns, start=1)
                if math.gcd(*col) != 1)
    r = rank(spec.U)
    msgs = [f"column {k} is not primitive (gcd {math.gcd(*spec.column(k))})" for k in bad]
    if r != spec.n:
        msgs.append(f"U has rank {r}, expected {spec.n}")
    return SpecDiagnostics(not msgs, bad, r, spec.n - r, tuple(msgs))


def kernel_sublattice(spec: SubtorusSpec) -> Sublattice:
    """Integer kernel of U, the lattice of the Lie algebra of N."""
    return Sublattice.from_generators(spec.d, integer_kernel(spec.U, spec.d), saturate_first=False)


def _minors(spec: SubtorusSpec):
    cols = spec.columns
    for subset in combinations(range(spec.d), spec.n):
        det = determinant([[cols[k][i] for k in subset] for i in range(spec.n)])
        yield frozenset(k + 1 for k in subset), det


def check_hypothesis_unimodular(spec: SubtorusSpec) -> UnimodularVerdict:
    """Every independent n-subset of columns must be a Z-basis of Z^n.

    The witness is the lexicographically first offending subset.
    """
    for subset, det in _minors(spec):
        if det not in (0, 1, -1):
            return UnimodularVerdict(False, subset, det)
    return UnimodularVerdict(True)


def check_ac_condition(spec: SubtorusSpec) -> UnimodularVerdict:
    """Every n-subset of columns, dependent ones included, must be a Z-basis."""
    for subset, det in _minors(spec):
        if det not in (1, -1):
            return UnimodularVerdict(False, subset, det)
    return UnimodularVerdict(True)


def stabilizer_dimension(spec: SubtorusSpec, I: Iterable[int]) -> tuple[int, Sublattice]:
    """Lattice of N_I = N cap T_I, where T_I = {t_p = 0 for p in I}."""
    idx = sorted(set(I))
    if any(not 1 <= p <= spec.d for p in idx):
        raise ShapeMismatch(f"index subset {idx} outside 1..{spec.d}")
    rows = [list(r) for r in spec.U]
    rows += [[1 if j == p - 1 else 0 for j in range(spec.d)] for p in idx]
    lat = Sublattice.from_generators(spec.d, integer_kernel(rows, spec.d), saturate_first=False)
    return lat.rank, lat


# ---------------------------------------------------------------------------
# directions of the Taub-NUT deformation

_SQRT_RE = re.compile(r"^sqrt\((\d+)\)$")


def squarefree_part(n: int) -> tuple[int, int]:
    """Write n = k^2 * s with s squarefree; return (k, s)."""
    if n <= 0:
        raise ValueError("expected a positive integer")
    k, s = 1, 1
    rest = n
    p = 2
    while p * p <= rest:
        while rest % (p * p) == 0:
            rest //= p * p
            k *= p
        if rest % p == 0:
            rest //= p
            s *= p
        p += 1
    return k, s * rest


@dataclass(frozen=True)
class RealSymbol:
    """A named real constant with a decimal value string.

    Names of the form ``sqrt(D)`` with D squarefree get their value computed
    to 50 digits when none is given; ``"1"`` is the unit.
    """

    name: str
    value: str = ""

    def __post_init__(self) -> None:
        name = self.name.strip()
        object.__setattr__(self, "name", name)
        if not self.value:
            if name == "1":
                object.__setattr__(self, "value", "1")
            elif (m := _SQRT_RE.match(name)):
                with localcontext() as ctx:
                    ctx.prec = 50
                    object.__setattr__(self, "value", str(Decimal(int(m.group(1))).sqrt()))
            else:
                raise ValueError(f"symbol {name!r} needs an explicit numeric value")
        v = Decimal(self.value)
        if not v.is_finite():
            raise ValueError(f"symbol {name!r} has non-finite value")

    @property
    def radicand(self) -> int | None:
        """D if the symbol is sqrt(D), 1 for the unit, else None."""
        if self.name == "1":
            return 1
        m = _SQRT_RE.match(self.name)
        return int(m.group(1)) if m else None

    @property
    def decimal(self) -> Decimal:
        return Decimal(self.value)


@dataclass(frozen=True)
class SigmaSpec:
    """Direction a in R^d written over Q-independent real symbols.

    ``coeffs`` is a d x J rational matrix with a_p = sum_j coeffs[p][j] * beta_j.
    The first symbol must be the unit 1.
    """

    symbols: tuple[RealSymbol, ...]
    coeffs: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        syms = tuple(s if isinstance(s, RealSymbol) else RealSymbol(*s) if isinstance(s, tuple)
                     else RealSymbol(s) for s in self.symbols)
        object.__setattr__(self, "symbols", syms)
        rows = tuple(tuple(as_fraction(x) for x in r) for r in self.coeffs)
        object.__setattr__(self, "coeffs", rows)
        if not syms or syms[0].name != "1":
            raise ValueError("the first symbol must be the unit '1'")
        if any(len(r) != len(syms) for r in rows):
            raise ShapeMismatch("each coefficient row needs one entry per symbol")
        vals = [s.decimal for s in syms]
        if len(set(vals)) != len(vals):
            raise ValueError("symbol values must be distinct")
        radicands = [s.radicand for s in syms if s.radicand is not None]
        for D in radicands:
            if D != 1 and squarefree_part(D)[0] != 1:
                raise ValueError(f"sqrt({D}) is not in lowest terms (radicand must be squarefree)")
        if len(set(radicands)) != len(radicands):
            raise ValueError("duplicate radical symbols")

    @classmethod
    def rational(cls, a: Sequence[object]) -> "SigmaSpec":
        return cls((RealSymbol("1"),), tuple((as_fraction(x),) for x in a))

    @classmethod
    def over(cls, names: Sequence[str], coeffs: Sequence[Sequence[object]]) -> "SigmaSpec":
        """Convenience constructor from symbol names (values derived)."""
        return cls(tuple(RealSymbol(nm) for nm in names), tuple(tuple(r) for r in coeffs))

    @property
    def d(self) -> int:
        return len(self.coeffs)

    def is_zero(self) -> bool:
        return all(x == 0 for r in self.coeffs for x in r)

    def numeric(self) -> list[float]:
        """Floating values of a_1, ..., a_d."""
        with localcontext() as ctx:
            ctx.prec = 50
            out = []
            for row in self.coeffs:
                acc = Decimal(0)
                for c, s in zip(row, self.symbols):
                    if c:
                        acc += Decimal(c.numerator) / Decimal(c.denominator) * s.decimal
                out.append(float(acc))
        return out

    def permuted(self, perm: Sequence[int]) -> "SigmaSpec":
        return SigmaSpec(self.symbols, tuple(self.coeffs[p] for p in perm))

    def scaled(self, lam: Fraction) -> "SigmaSpec":
        return SigmaSpec(self.symbols, tuple(tuple(lam * x for x in r) for r in self.coeffs))


@dataclass(frozen=True)
class SigmaAnalysis:
    I_sigma: IndexSubset
    dim_T_sigma: int
    dim_T_sigma_cap_N: int
    transversal: bool
    annihilator: Sublattice = field(compare=False)


def sigma_analysis(spec: SubtorusSpec, sigma: SigmaSpec) -> SigmaAnalysis:
    """Closure data of the one-parameter subgroup t -> exp(t a).

    The closure T_sigma has Lie algebra equal to the rational span of the
    columns of the coefficient matrix C, because the symbols are
    Q-independent.  Its dimension is d minus the rank of the annihilator
    lattice {m in Z^d : m . a = 0}, which is the integer kernel of C^T.
    """
    if sigma.d != spec.d:
        raise ShapeMismatch(f"sigma has {sigma.d} entries, spec has d={spec.d}")
    if sigma.is_zero():
        raise SigmaZero("a = 0")
    C = sigma.coeffs
    J = len(sigma.symbols)
    zero_rows = frozenset(p + 1 for p, row in enumerate(C) if not any(row))
    # clear denominators column by column; the annihilator only sees the span
    Ct = []
    for j in range(J):
        col = [C[p][j] for p in range(spec.d)]
        den = math.lcm(*(x.denominator for x in col))
        Ct.append([int(x * den) for x in col])
    ann = Sublattice.from_generators(spec.d, integer_kernel(Ct, spec.d), saturate_first=False)
    dim_T = spec.d - ann.rank
    kernel = kernel_sublattice(spec)
    span_cols = [row for row in Ct if any(row)]
    r_C = rank(span_cols) if span_cols else 0
    r_K = kernel.rank
    r_both = rank(span_cols + [list(b) for b in kernel.basis]) if (span_cols or r_K) else 0
    cap = r_C + r_K - r_both
    return SigmaAnalysis(zero_rows, dim_T, cap, cap < r_C, ann)


def require_transversal(spec: SubtorusSpec, sigma: SigmaSpec) -> SigmaAnalysis:
    info = sigma_analysis(spec, sigma)
    if not info.transversal:
        raise NotTransversal("sigma(R) lies in the Lie algebra of N")
    return info
