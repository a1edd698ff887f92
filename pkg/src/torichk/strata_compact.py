"""Stabilizer strata and boundary combinatorics of the compactifications.

Two descriptors are produced, both purely combinatorial:

* the quasi-asymptotically conical compactification of H^d, obtained by
  blowing up, in order of inclusion, the boundaries of the closed strata
  V_I = {q_p = 0 for p not in I};
* the compactification of H^d x Im H used for the Taub-NUT deformation,
  with its four boundary hypersurfaces, weights 0 or 1/2 and the foliation
  flag on the maximal one.

Only hypersurfaces that actually meet the closure of the level set are
listed in the first descriptor: a stratum V_J shows up at infinity of the
quotient exactly when the cone mu_N^{-1}(0) has points in it with
stabilizer N_J.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable

from .lattice_core import (
    IndexSubset,
    SigmaSpec,
    SubtorusSpec,
    rank,
    require_transversal,
    stabilizer_dimension,
)

HALF = Fraction(1, 2)


@dataclass(frozen=True)
class StratumRecord:
    I: IndexSubset
    dim_stabilizer: int
    dim_V: int


@dataclass(frozen=True)
class Hypersurface:
    id: str
    label: str
    base_description: str
    base_dim: int
    fiber_model: str
    fiber_description: str
    fiber_dim: int
    weight: Fraction
    foliated: bool = False
    index_set: IndexSubset | None = None
    stabilizer_dim: int | None = None
    equations: str = ""

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "label": self.label,
            "base": {"description": self.base_description, "dim": self.base_dim},
            "fiber": {"model": self.fiber_model, "description": self.fiber_description,
                      "dim": self.fiber_dim},
            "weight": str(self.weight),
            "foliated": self.foliated,
            "equations": self.equations,
        }
        if self.index_set is not None:
            out["index_set"] = sorted(self.index_set)
        if self.stabilizer_dim is not None:
            out["stabilizer_dim"] = self.stabilizer_dim
        return out


@dataclass(frozen=True)
class CompactificationDescriptor:
    kind: str
    ambient_dim: int
    hypersurfaces: tuple[Hypersurface, ...]
    order: tuple[tuple[str, str], ...]
    meets: tuple[tuple[str, str], ...] = field(default=())

    @property
    def ids(self) -> list[str]:
        return [h.id for h in self.hypersurfaces]

    def get(self, hid: str) -> Hypersurface:
        return next(h for h in self.hypersurfaces if h.id == hid)

    @property
    def bdf_rule(self) -> str:
        """Weighted total boundary function as a product of boundary functions."""
        parts = []
        for h in self.hypersurfaces:
            e = Fraction(-1) / (1 - h.weight)
            parts.append(f"x_{h.id}^({e})")
        return "rho = " + " * ".join(parts)

    def covering_relations(self) -> list[tuple[str, str]]:
        rel = set(self.order)
        return [(a, b) for a, b in self.order
                if not any((a, c) in rel and (c, b) in rel for c in self.ids)]

    def sanity_problems(self) -> list[str]:
        """Iterated fibration data checks; empty list means all pass."""
        problems = []
        rel = set(self.order)
        ids = set(self.ids)
        for a, b in rel:
            if a not in ids or b not in ids:
                problems.append(f"order mentions unknown hypersurface in {(a, b)}")
            if a == b:
                problems.append(f"order is not irreflexive at {a}")
            if (b, a) in rel:
                problems.append(f"order is not antisymmetric on {(a, b)}")
        for a, b in rel:
            for c, e in rel:
                if b == c and (a, e) not in rel:
                    problems.append(f"order is not transitive: {a}<{b}<{e}")
        for a, b in self.meets:
            if (a, b) not in rel and (b, a) not in rel:
                problems.append(f"{a} and {b} meet but are not comparable")
        for a, b in rel:
            if self.get(a).weight > self.get(b).weight:
                problems.append(f"weight decreases along {a}<{b}")
        for h in self.hypersurfaces:
            if h.base_dim + h.fiber_dim != self.ambient_dim - 1:
                problems.append(f"{h.id}: base + fiber dims != {self.ambient_dim - 1}")
        return problems

    def to_dot(self) -> str:
        lines = [f'digraph "{self.kind}" {{']
        for h in self.hypersurfaces:
            label = (f"{h.label} [ν={h.weight}] base={h.base_description} ({h.base_dim}), "
                     f"fiber={h.fiber_description} ({h.fiber_dim})")
            label = label.replace('"', r'\"')
            lines.append(f'  "{h.id}" [label="{label}"];')
        for a, b in sorted(self.covering_relations()):
            lines.append(f'  "{a}" -> "{b}";')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "ambient_dim": self.ambient_dim,
            "hypersurfaces": [h.to_dict() for h in self.hypersurfaces],
            "order": [list(p) for p in self.order],
            "meets": [list(p) for p in self.meets],
            "bdf_rule": self.bdf_rule,
        }


def _fmt(I: Iterable[int]) -> str:
    return "{" + ",".join(str(i) for i in sorted(I)) + "}"


def _subset_key(I: IndexSubset) -> tuple:
    return (len(I), sorted(I))


def _all_dims(spec: SubtorusSpec) -> dict[IndexSubset, int]:
    dims = {}
    for r in range(spec.d + 1):
        for sub in combinations(range(1, spec.d + 1), r):
            dims[frozenset(sub)] = stabilizer_dimension(spec, sub)[0]
    return dims


def _is_stratum(I: IndexSubset, d: int, dims: dict[IndexSubset, int]) -> bool:
    # N_J only shrinks along J, so single-element extensions suffice
    return all(dims[I | {p}] < dims[I] for p in range(1, d + 1) if p not in I)


def enumerate_strata(spec: SubtorusSpec) -> list[StratumRecord]:
    """All index sets satisfying the stratum condition, smallest first."""
    dims = _all_dims(spec)
    out = [StratumRecord(I, dims[I], 4 * len(I))
           for I in dims if _is_stratum(I, spec.d, dims)]
    return sorted(out, key=lambda s: _subset_key(s.I))


def _closure(spec: SubtorusSpec, K: IndexSubset) -> IndexSubset:
    """Largest J containing K with N_J = N_K: coordinates vanishing on N_K."""
    _, lat = stabilizer_dimension(spec, K)
    return frozenset(p for p in range(1, spec.d + 1) if all(b[p - 1] == 0 for b in lat.basis))


def _is_flat(spec: SubtorusSpec, F: IndexSubset) -> bool:
    cols = spec.columns
    base = [cols[j - 1] for j in sorted(F)]
    r = rank(base) if base else 0
    return all(rank(base + [cols[k - 1]]) > r for k in range(1, spec.d + 1) if k not in F)


def cone_strata(spec: SubtorusSpec) -> list[IndexSubset]:
    """Strata whose boundary at infinity meets the cone mu_N^{-1}(0).

    A point of the cone with support K exists iff the complement of K is a
    flat of the column matroid (no u_k, k in K, lies in the span of the
    others).  Its stabilizer is N_K, whose stratum is the closure of K.
    """
    d = spec.d
    found = set()
    for r in range(1, d + 1):
        for K in combinations(range(1, d + 1), r):
            Kset = frozenset(K)
            if _is_flat(spec, frozenset(range(1, d + 1)) - Kset):
                found.add(_closure(spec, Kset))
    return sorted(found, key=_subset_key)


def qac_compactification(spec: SubtorusSpec) -> CompactificationDescriptor:
    """Boundary combinatorics of the QAC compactification of the quotient."""
    d = spec.d
    full = frozenset(range(1, d + 1))
    strata = cone_strata(spec)
    hs = []
    for i, J in enumerate(strata, start=1):
        dimN = stabilizer_dimension(spec, J)[0]
        if J == full:
            hs.append(Hypersurface(
                f"H{i}", "H_max", "boundary of closure(H^d)", 4 * d - 1,
                "identity", "point", 0, Fraction(0), index_set=J, stabilizer_dim=0,
                equations="mu_N(omega) = -u^2 zeta on the sphere at infinity"))
        else:
            Jc = full - J
            hs.append(Hypersurface(
                f"H{i}", f"H_I={_fmt(J)}",
                f"boundary of closure(V_{_fmt(J)})", 4 * len(J) - 1,
                "resolved-vector-space",
                f"resolved V_{_fmt(Jc)} with N_I of dim {dimN}", 4 * len(Jc),
                Fraction(0), index_set=J, stabilizer_dim=dimN,
                equations=(f"mu_(N_I)(q_hat) = -zeta_I on fibres; "
                           f"mu_check(omega_check) = -u_I^2 zeta_I_perp on the base, I={_fmt(J)}")))
    order = []
    for a in hs:
        for b in hs:
            if a.index_set < b.index_set:
                order.append((a.id, b.id))
    return CompactificationDescriptor("QAC", 4 * d, tuple(hs), tuple(order), tuple(order))


def tn_compactification(spec: SubtorusSpec, sigma: SigmaSpec) -> CompactificationDescriptor:
    """Boundary combinatorics of the compactification of H^d x Im H.

    Raises:
        NotTransversal: if sigma(R) lies in the Lie algebra of N.
    """
    info = require_transversal(spec, sigma)
    d = spec.d
    I = info.I_sigma
    full = frozenset(range(1, d + 1))
    Ic = full - I
    k, kc = len(I), len(Ic)
    present_13 = bool(I)
    hs = []
    if present_13:
        hs.append(Hypersurface(
            "H1", "Ĥ₁", f"boundary of closure(V_{_fmt(I)} x {{0}})", 4 * k - 1,
            "graph-fibre-blowup",
            f"[closure(V_{_fmt(Ic)} x ImH); boundary of closure({{0}} x ImH)], x^(1/2) structure",
            4 * kc + 3, Fraction(0), index_set=I,
            equations="mu_sigma(q_Ic) = q_ImH in fibres; mu_(N,I)(omega_I) = 0 on the base"))
    hs.append(Hypersurface(
        "H2", "Ĥ₂", "boundary of closure({0} x ImH) = S^2", 2,
        "radial-blowup", f"[closure(H^d); boundary of closure(V_{_fmt(I)})]", 4 * d,
        HALF, index_set=I,
        equations="mu_sigma(Q_2,Ic) = omega_ImH; mu_N(Q_I, Q_2,Ic) = -u zeta"))
    if present_13:
        hs.append(Hypersurface(
            "H3", "Ĥ₃",
            f"[boundary of closure(V_{_fmt(I)} x ImH); boundary of V_{_fmt(I)} x 0; boundary of 0 x ImH]",
            4 * k + 2, "radial-compactification", f"closure(V_{_fmt(Ic)})", 4 * kc,
            HALF, index_set=I,
            equations="mu_sigma(Q_Ic) = omega_1,ImH; "
                      "mu_(N,I)(omega_I) + (u^2/xi^2) mu_(N,Ic)(Q_Ic) = -u^2 zeta"))
    hs.append(Hypersurface(
        "H4", "Ĥ₄ (expansion in x^(1/2))", "Ĥ₄ itself", 4 * d + 2,
        "identity", "point", 0, HALF, foliated=True,
        equations="mu_sigma(omega_H^d) = u omega_ImH; mu_N(omega_H^d) = -u^2 zeta"))
    present = {h.id for h in hs}
    pairs = [("H1", "H3"), ("H3", "H4"), ("H1", "H4"), ("H2", "H3"), ("H2", "H4")]
    order = tuple(p for p in pairs if p[0] in present and p[1] in present)
    return CompactificationDescriptor("TN", 4 * d + 3, tuple(hs), order, order)
