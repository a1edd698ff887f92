"""Closed-form asymptotic invariants and Kronecker slope classification.

The growth orders, tangent cone dimensions and decay classes are integer or
label valued functions of the exact data computed in :mod:`lattice_core` and
:mod:`arrangement`.  Slopes of the Kronecker foliations live in a real
quadratic field, where GL(2, Z)-equivalence is decided exactly through the
periodic part of the continued fraction expansion.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .arrangement import SmoothnessVerdict, ZetaLift, smoothness_check
from .errors import PreconditionFailed, UnsupportedNumberField
from .lattice_core import (
    SigmaAnalysis,
    SigmaSpec,
    SubtorusSpec,
    check_ac_condition,
    require_transversal,
    squarefree_part,
)


class MetricClass(str, enum.Enum):
    SINGULAR = "SINGULAR"
    QAC = "QAC"
    AC = "AC"


class DecayClass(str, enum.Enum):
    FULL_DECAY = "FULL_DECAY"
    PARTIAL_DECAY = "PARTIAL_DECAY"


CONE_DESCRIPTOR = "(M_{0,σ}/T_σ) × Im ℍ"
UNDEFORMED_CONE_DESCRIPTOR = "M_0 = μ_N^{-1}(0)/N"


@dataclass(frozen=True)
class InvariantReport:
    dim_M: int
    metric_class: MetricClass
    volume_growth_undeformed: int
    volume_growth_deformed: int | None
    cone_dim_undeformed: int
    cone_dim_deformed: int | None
    cone_descriptor: str | None
    decay_class: DecayClass | None
    smoothness: SmoothnessVerdict
    sigma: SigmaAnalysis | None = None
    cone_descriptor_undeformed: str = UNDEFORMED_CONE_DESCRIPTOR

    def to_dict(self) -> dict:
        sm = self.smoothness
        out = {
            "dim_M": self.dim_M,
            "metric_class": self.metric_class.value,
            "volume_growth_undeformed": self.volume_growth_undeformed,
            "volume_growth_deformed": self.volume_growth_deformed,
            "cone_dim_undeformed": self.cone_dim_undeformed,
            "cone_dim_deformed": self.cone_dim_deformed,
            "cone_descriptor_undeformed": self.cone_descriptor_undeformed,
            "cone_descriptor": self.cone_descriptor,
            "decay_class": self.decay_class.value if self.decay_class else None,
            "smoothness": {
                "smooth": sm.smooth,
                "distinct": sm.distinct,
                "coincident": list(sm.coincident) if sm.coincident else None,
                "excess_flat": sorted(sm.excess_flat) if sm.excess_flat else None,
                "bad_flat": sorted(sm.bad_flat) if sm.bad_flat else None,
            },
        }
        if self.sigma is not None:
            out["sigma"] = {
                "I_sigma": sorted(self.sigma.I_sigma),
                "dim_T_sigma": self.sigma.dim_T_sigma,
                "dim_T_sigma_cap_N": self.sigma.dim_T_sigma_cap_N,
                "transversal": self.sigma.transversal,
            }
        return out


def invariant_report(spec: SubtorusSpec, tau: ZetaLift,
                     sigma: SigmaSpec | None = None) -> InvariantReport:
    """Dimension, metric class, growth orders and cone data.

    Deformation-dependent fields are None when no direction is given.

    Raises:
        NotTransversal: if sigma(R) lies in the Lie algebra of N.
    """
    dim_M = 4 * (spec.d - spec.dim_N)
    verdict = smoothness_check(spec, tau)
    if not verdict.smooth:
        cls = MetricClass.SINGULAR
    elif check_ac_condition(spec).holds:
        cls = MetricClass.AC
    else:
        cls = MetricClass.QAC
    if sigma is None:
        return InvariantReport(dim_M, cls, dim_M, None, dim_M, None, None, None, verdict)
    info = require_transversal(spec, sigma)
    cone = dim_M - info.dim_T_sigma + info.dim_T_sigma_cap_N
    decay = DecayClass.FULL_DECAY if not info.I_sigma else DecayClass.PARTIAL_DECAY
    return InvariantReport(dim_M, cls, dim_M, dim_M - 1, dim_M, cone, CONE_DESCRIPTOR,
                           decay, verdict, info)


@dataclass(frozen=True)
class DecayDetail:
    decay_class: DecayClass
    bound: str
    flags: tuple[str, ...]


def decay_class_detail(spec: SubtorusSpec, sigma: SigmaSpec) -> DecayDetail:
    """Sectional curvature bound of the deformed metric."""
    info = require_transversal(spec, sigma)
    if not info.I_sigma:
        return DecayDetail(DecayClass.FULL_DECAY, "O(x₄²ρ^{-1})", ())
    return DecayDetail(DecayClass.PARTIAL_DECAY, "O(x₄²v_{1/2}²)",
                       ("non-decaying directions near Ĥ₁",))


# ---------------------------------------------------------------------------
# real quadratic slopes


@dataclass(frozen=True)
class QuadraticSlope:
    """The real number (p + q sqrt(D)) / r, or the point at infinity.

    Canonical form: r > 0, gcd(p, q, r) = 1, D squarefree and > 1 when
    q != 0; rationals have q = 0 and D = 0.  Use :meth:`make` to build.
    """

    p: int
    q: int
    r: int
    D: int
    infinite: bool = False

    @classmethod
    def make(cls, p: int, q: int = 0, r: int = 1, D: int = 0) -> "QuadraticSlope":
        if r == 0:
            raise ValueError("zero denominator; use QuadraticSlope.infinity()")
        if D < 0:
            raise ValueError("D must be nonnegative")
        if q != 0 and D > 0:
            k, D = squarefree_part(D)
            q *= k
            if D == 1:
                p, q, D = p + q, 0, 0
        else:
            q, D = 0, 0
        if r < 0:
            p, q, r = -p, -q, -r
        g = math.gcd(math.gcd(p, q), r)
        return cls(p // g, q // g, r // g, D)

    @classmethod
    def infinity(cls) -> "QuadraticSlope":
        return cls(1, 0, 0, 0, True)

    @classmethod
    def from_field(cls, x: Fraction, y: Fraction, D: int) -> "QuadraticSlope":
        """x + y sqrt(D) with rational x, y."""
        den = math.lcm(x.denominator, y.denominator)
        return cls.make(int(x * den), int(y * den), den, D if y else 0)

    @property
    def is_rational(self) -> bool:
        return self.infinite or self.q == 0

    def field_parts(self) -> tuple[Fraction, Fraction]:
        return Fraction(self.p, self.r), Fraction(self.q, self.r)

    def __float__(self) -> float:
        if self.infinite:
            return math.inf
        return (self.p + self.q * math.sqrt(self.D)) / self.r

    def __str__(self) -> str:
        if self.infinite:
            return "inf"
        if self.q == 0:
            return str(Fraction(self.p, self.r))
        rad = f"sqrt({self.D})"
        if self.q == 1:
            irr = rad
        elif self.q == -1:
            irr = f"-{rad}"
        else:
            irr = f"{self.q}*{rad}"
        if self.p == 0:
            num = irr
        else:
            num = f"{self.p}{'+' if self.q > 0 else ''}{irr}"
        if self.r == 1:
            return num
        if self.p == 0:
            return f"{num}/{self.r}"
        return f"({num})/{self.r}"

    def mobius(self, a: int, b: int, c: int, d: int) -> "QuadraticSlope":
        """(a x + b) / (c x + d)."""
        if self.infinite:
            return QuadraticSlope.infinity() if c == 0 else QuadraticSlope.make(a, 0, c)
        x, y = self.field_parts()
        num = (a * x + b, a * y)
        den = (c * x + d, c * y)
        D = self.D
        if den == (0, 0):
            return QuadraticSlope.infinity()
        return _field_div(num, den, D)


def _field_div(num: tuple[Fraction, Fraction], den: tuple[Fraction, Fraction], D: int) -> QuadraticSlope:
    x, y = num
    u, v = den
    norm = u * u - D * v * v
    return QuadraticSlope.from_field((x * u - D * y * v) / norm, (y * u - x * v) / norm, D)


_SLOPE_TERM = re.compile(
    r"^\s*(?P<p>[+-]?\d+)?\s*(?:(?P<sign>[+-])?\s*(?:(?P<q>\d+)\s*\*?\s*)?sqrt\((?P<D>\d+)\))?\s*$")


def parse_slope(text: str) -> QuadraticSlope:
    """Parse forms like ``3/7``, ``sqrt(2)``, ``1+sqrt(2)``, ``(2+3*sqrt(5))/4``, ``inf``."""
    if re.search(r"\d\s+\d", text):
        raise ValueError(f"cannot parse slope {text!r}")
    s = text.strip().replace(" ", "")
    if s.lower() in {"inf", "infinity", "∞"}:
        return QuadraticSlope.infinity()
    r = 1
    m = re.match(r"^\((.*)\)/(-?\d+)$", s)
    if m:
        s, r = m.group(1), int(m.group(2))
    elif "/" in s and "sqrt" not in s:
        f = Fraction(s)
        return QuadraticSlope.make(f.numerator, 0, f.denominator)
    elif re.match(r"^.*sqrt\(\d+\)/-?\d+$", s):
        s, r = s.rsplit("/", 1)[0], int(s.rsplit("/", 1)[1])
    m = _SLOPE_TERM.match(s)
    if not m or (m.group("p") is None and m.group("D") is None):
        raise ValueError(f"cannot parse slope {text!r}")
    p = int(m.group("p") or 0)
    if m.group("D") is None:
        return QuadraticSlope.make(p, 0, r)
    q = int(m.group("q") or 1)
    if m.group("sign") == "-":
        q = -q
    elif m.group("sign") is None and m.group("p") is not None:
        raise ValueError(f"cannot parse slope {text!r}")
    return QuadraticSlope.make(p, q, r, int(m.group("D")))


def kronecker_slopes(spec: SubtorusSpec, sigma: SigmaSpec) -> list[tuple[tuple[int, int], QuadraticSlope]]:
    """Slopes a_j / a_i for all pairs i < j (1-based) with a_i != 0.

    Raises:
        UnsupportedNumberField: if the entries do not lie in one field Q(sqrt D).
    """
    if sigma.d != spec.d:
        raise PreconditionFailed("sigma and spec disagree on d")
    used = [j for j in range(len(sigma.symbols)) if any(row[j] for row in sigma.coeffs)]
    D = 0
    for j in used:
        rad = sigma.symbols[j].radicand
        if rad is None:
            raise UnsupportedNumberField(f"symbol {sigma.symbols[j].name} is not a quadratic surd")
        if rad == 1:
            continue
        if D and rad != D:
            raise UnsupportedNumberField(f"entries mix sqrt({D}) and sqrt({rad})")
        D = rad
    idx = {sigma.symbols[j].radicand: j for j in used}
    entries = []
    for row in sigma.coeffs:
        x = row[idx[1]] if 1 in idx else Fraction(0)
        y = row[idx[D]] if D else Fraction(0)
        entries.append((x, y))
    out = []
    for i in range(spec.d):
        if entries[i] == (0, 0):
            continue
        for j in range(i + 1, spec.d):
            out.append(((i + 1, j + 1), _field_div(entries[j], entries[i], D)))
    return out


# ---------------------------------------------------------------------------
# continued fractions and GL(2, Z)-equivalence


@dataclass(frozen=True)
class ContinuedFraction:
    preperiod: tuple[int, ...]
    period: tuple[int, ...]


def _surd_state(x: QuadraticSlope) -> tuple[int, int, int]:
    """(P, Q, E) with x = (P + sqrt E) / Q and Q dividing E - P^2."""
    s = 1 if x.q > 0 else -1
    P, Q, E = s * x.p, s * x.r, x.q * x.q * x.D
    aQ = abs(Q)
    return P * aQ, Q * aQ, E * Q * Q


def continued_fraction(x: QuadraticSlope, max_terms: int = 100000) -> ContinuedFraction:
    """Expansion of x; rationals get an empty period."""
    if x.infinite:
        return ContinuedFraction((), ())
    if x.q == 0:
        p, r = x.p, x.r
        terms = []
        while r:
            a = p // r
            terms.append(a)
            p, r = r, p - a * r
        return ContinuedFraction(tuple(terms), ())
    P, Q, E = _surd_state(x)
    s = math.isqrt(E)
    seen: dict[tuple[int, int], int] = {}
    terms: list[int] = []
    while (P, Q) not in seen:
        if len(terms) > max_terms:
            raise RuntimeError("continued fraction period not found")
        seen[(P, Q)] = len(terms)
        a = (P + s) // Q if Q > 0 else -((P + s) // (-Q)) - 1
        terms.append(a)
        P = a * Q - P
        Q = (E - P * P) // Q
    start = seen[(P, Q)]
    return ContinuedFraction(tuple(terms[:start]), _minimal_period(tuple(terms[start:])))


def _minimal_period(seq: tuple[int, ...]) -> tuple[int, ...]:
    n = len(seq)
    for k in range(1, n + 1):
        if n % k == 0 and seq[:k] * (n // k) == seq:
            return seq[:k]
    return seq


def _is_rotation(a: tuple[int, ...], b: tuple[int, ...]) -> bool:
    if len(a) != len(b):
        return False
    doubled = a + a
    return any(doubled[i:i + len(b)] == b for i in range(len(a)))


def serret_equivalent(alpha: QuadraticSlope, beta: QuadraticSlope) -> bool:
    """GL(2, Z)-equivalence of two slopes.

    Rationals and infinity form one class.  Irrationals are equivalent iff
    their continued fractions eventually agree, i.e. their periods are
    cyclic rotations of each other.
    """
    if alpha.is_rational or beta.is_rational:
        return alpha.is_rational and beta.is_rational
    if alpha.D != beta.D:
        return False
    return _is_rotation(continued_fraction(alpha).period, continued_fraction(beta).period)


def classify_slopes(slopes: Sequence[QuadraticSlope]) -> list[list[int]]:
    """Partition indices of ``slopes`` into equivalence classes, in input order."""
    classes: list[list[int]] = []
    for i, s in enumerate(slopes):
        for cls in classes:
            if serret_equivalent(slopes[cls[0]], s):
                cls.append(i)
                break
        else:
            classes.append([i])
    return classes
