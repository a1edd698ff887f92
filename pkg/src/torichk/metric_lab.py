"""Numerical quotient metric, its Taub-NUT deformation and FD curvature.

Real coordinates on H^d are ordered (Re z, Im z, Re w, Im w), each block of
length d, with the flat Euclidean metric.  The torus acts by
z_k -> exp(-i t_k) z_k and w_k -> exp(i t_k) w_k and has the quadratic
hyperkahler moment map

    mu_1 = (-|z_k|^2 + |w_k|^2) / 2,   mu_2 + i mu_3 = i z_k w_k

in each coordinate.  The quotient metric at a point of the level set is the
restriction of the flat metric to the horizontal space (tangent to the
level set, orthogonal to the N-orbit).  The deformed metric is computed on
the graph of mu_sigma: the graph term |d mu_sigma|^2 is added and the
norm of the sigma Killing field is changed from 1/V to 1/(V + 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .arrangement import ZetaLift
from .errors import (
    DegenerateOrbit,
    DimensionMismatch,
    NoConvergence,
    PreconditionFailed,
    SingularJacobian,
    StepTooLarge,
)
from .lattice_core import SigmaSpec, SubtorusSpec, kernel_sublattice

_RANK_TOL = 1e-10


@dataclass(frozen=True)
class AmbientPoint:
    """Point (or tangent vector) of H^d, optionally with an Im H component."""

    z: tuple[complex, ...]
    w: tuple[complex, ...]
    q: tuple[float, float, float] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "z", tuple(complex(x) for x in self.z))
        object.__setattr__(self, "w", tuple(complex(x) for x in self.w))
        if len(self.z) != len(self.w):
            raise DimensionMismatch("z and w must have the same length")
        vals = [*self.z, *self.w]
        if not all(math.isfinite(v.real) and math.isfinite(v.imag) for v in vals):
            raise ValueError("non-finite coordinate")

    @property
    def d(self) -> int:
        return len(self.z)

    def real(self) -> np.ndarray:
        z = np.array(self.z)
        w = np.array(self.w)
        return np.concatenate([z.real, z.imag, w.real, w.imag])

    @classmethod
    def from_real(cls, x: np.ndarray) -> "AmbientPoint":
        d = len(x) // 4
        z = x[:d] + 1j * x[d:2 * d]
        w = x[2 * d:3 * d] + 1j * x[3 * d:]
        return cls(tuple(z), tuple(w))


# ---------------------------------------------------------------------------
# moment maps and Killing fields on real coordinates


def _split(x: np.ndarray) -> tuple[np.ndarray, ...]:
    d = len(x) // 4
    return x[:d], x[d:2 * d], x[2 * d:3 * d], x[3 * d:]


def moment_components(x: np.ndarray) -> np.ndarray:
    """Per-coordinate moment maps, shape (d, 3)."""
    a, b, u, v = _split(x)
    mu1 = 0.5 * (-a * a - b * b + u * u + v * v)
    mu2 = -(a * v + b * u)
    mu3 = a * u - b * v
    return np.stack([mu1, mu2, mu3], axis=1)


def moment_jacobian(x: np.ndarray) -> np.ndarray:
    """Gradients of the per-coordinate moment maps, shape (d, 3, 4d)."""
    d = len(x) // 4
    a, b, u, v = _split(x)
    jac = np.zeros((d, 3, 4 * d))
    k = np.arange(d)
    blocks = [(-a, -b, u, v), (-v, -u, -b, -a), (u, -v, a, -b)]
    for c, grads in enumerate(blocks):
        for s, g in enumerate(grads):
            jac[k, c, s * d + k] = g
    return jac


def killing_vector(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Generator of the torus action along t in real coordinates."""
    a, b, u, v = _split(x)
    t = np.asarray(t, dtype=float)
    return np.concatenate([t * b, -t * a, -t * v, t * u])


@dataclass(frozen=True)
class MomentValues:
    mu: np.ndarray
    mu_N: np.ndarray
    mu_sigma: np.ndarray | None


def kernel_matrix(spec: SubtorusSpec) -> np.ndarray:
    """Canonical kernel generators as rows, shape (d - n, d)."""
    basis = kernel_sublattice(spec).basis
    return np.array(basis, dtype=float).reshape(len(basis), spec.d)


def moment_eval(m: AmbientPoint, spec: SubtorusSpec,
                a: Sequence[float] | None = None) -> MomentValues:
    """Full, N- and sigma-moment maps at m.

    ``mu`` lists the triples mu^(k), ``mu_N`` the triples paired with the
    canonical kernel generators, ``mu_sigma`` the sum of a_k mu^(k).
    """
    if m.d != spec.d:
        raise DimensionMismatch("point and spec disagree on d")
    comps = moment_components(m.real())
    K = kernel_matrix(spec)
    mu_sigma = None if a is None else np.asarray(a, dtype=float) @ comps
    return MomentValues(comps.reshape(-1), (K @ comps).reshape(-1), mu_sigma)


def killing_field(m: AmbientPoint, t: Sequence[float]) -> AmbientPoint:
    """Tangent vector (-i t_k z_k, i t_k w_k) of the torus action."""
    if len(t) != m.d:
        raise DimensionMismatch("t must have length d")
    return AmbientPoint(tuple(-1j * tk * zk for tk, zk in zip(t, m.z)),
                        tuple(1j * tk * wk for tk, wk in zip(t, m.w)))


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ProbeConfig:
    """Numerical setup for one hyperkahler quotient.

    ``zeta`` has shape (d - n, 3): one triple per canonical kernel generator.
    The Newton tolerance is applied to |mu_N + zeta| / max(1, |m|^2), and
    finite difference steps are ``fd_step * max(1, |m|)``.
    """

    spec: SubtorusSpec
    zeta: np.ndarray
    a: np.ndarray
    deformed: bool = False
    newton_tol: float = 1e-12
    fd_step: float = 3e-3
    richardson: int = 2
    max_newton: int = 60
    step_tolerance: float = 0.25
    curvature_floor: float = 1e-7
    kernel: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.newton_tol <= 0 or self.fd_step <= 0:
            raise PreconditionFailed("newton_tol and fd_step must be positive")
        if self.richardson < 1:
            raise PreconditionFailed("richardson must be at least 1")
        dN = self.spec.dim_N
        zeta = np.asarray(self.zeta, dtype=float).reshape(dN, 3)
        a = np.asarray(self.a, dtype=float).reshape(self.spec.d)
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "kernel", kernel_matrix(self.spec))

    @classmethod
    def build(cls, spec: SubtorusSpec, tau: ZetaLift | None = None,
              sigma: SigmaSpec | Sequence[float] | None = None, **kw) -> "ProbeConfig":
        """Config from exact data; tau = None means the zero level."""
        if tau is None:
            zeta = np.zeros((spec.dim_N, 3))
        else:
            zeta = np.array([[float(c) for c in t] for t in tau.zeta(spec)]).reshape(spec.dim_N, 3)
        if sigma is None:
            a = np.zeros(spec.d)
        elif isinstance(sigma, SigmaSpec):
            a = np.array(sigma.numeric())
        else:
            a = np.asarray(sigma, dtype=float)
        return cls(spec, zeta, a, **kw)

    def with_(self, **kw) -> "ProbeConfig":
        base = dict(spec=self.spec, zeta=self.zeta, a=self.a, deformed=self.deformed,
                    newton_tol=self.newton_tol, fd_step=self.fd_step,
                    richardson=self.richardson, max_newton=self.max_newton,
                    step_tolerance=self.step_tolerance, curvature_floor=self.curvature_floor)
        base.update(kw)
        return ProbeConfig(**base)

    @property
    def dim_quotient(self) -> int:
        return 4 * self.spec.n


def _residual(x: np.ndarray, cfg: ProbeConfig) -> np.ndarray:
    return (cfg.kernel @ moment_components(x) + cfg.zeta).reshape(-1)


def _jac_N(x: np.ndarray, cfg: ProbeConfig) -> np.ndarray:
    jac = moment_jacobian(x)
    return np.einsum("jk,kcm->jcm", cfg.kernel, jac).reshape(-1, len(x))


def _scale(x: np.ndarray) -> float:
    return max(1.0, float(x @ x))


def level_project(m0: AmbientPoint, cfg: ProbeConfig) -> AmbientPoint:
    """Minimum-norm Newton iteration onto mu_N = -zeta.

    Raises:
        SingularJacobian: if the moment map Jacobian drops rank.
        NoConvergence: if the iteration budget runs out.
    """
    if m0.d != cfg.spec.d:
        raise DimensionMismatch("point and spec disagree on d")
    if cfg.spec.dim_N == 0:
        return m0
    x = m0.real().copy()
    for _ in range(cfg.max_newton):
        F = _residual(x, cfg)
        if np.linalg.norm(F) <= cfg.newton_tol * _scale(x):
            return AmbientPoint.from_real(x)
        J = _jac_N(x, cfg)
        sv = np.linalg.svd(J, compute_uv=False)
        if sv[-1] <= _RANK_TOL * max(sv[0], 1.0):
            raise SingularJacobian("moment map Jacobian is rank deficient")
        step = np.linalg.lstsq(J, -F, rcond=None)[0]
        x = x + step
    if np.linalg.norm(_residual(x, cfg)) <= cfg.newton_tol * _scale(x):
        return AmbientPoint.from_real(x)
    raise NoConvergence(f"Newton did not converge in {cfg.max_newton} steps")


def residual_norm(m: AmbientPoint, cfg: ProbeConfig) -> float:
    if cfg.spec.dim_N == 0:
        return 0.0
    return float(np.linalg.norm(_residual(m.real(), cfg)))


# ---------------------------------------------------------------------------
# metric at a point


@dataclass(frozen=True)
class MetricSample:
    point: AmbientPoint
    slice_basis: np.ndarray
    G: np.ndarray
    xi_norm2: float
    V1: float
    tn_fiber_norm2: float | None
    xi_coords: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "G": self.G.tolist(),
            "xi_norm2": self.xi_norm2,
            "V1": self.V1,
            "tn_fiber_norm2": self.tn_fiber_norm2,
        }


def horizontal_basis(x: np.ndarray, cfg: ProbeConfig) -> np.ndarray:
    """Orthonormal basis (columns) of the horizontal space at x.

    Raises:
        SingularJacobian: if the level set is not a submanifold at x.
        DegenerateOrbit: if the N-orbit through x has lower dimension.
    """
    n4 = 4 * len(x) // 4
    dN = cfg.spec.dim_N
    if dN == 0:
        return np.eye(n4)
    J = _jac_N(x, cfg)
    O = np.stack([killing_vector(x, b) for b in cfg.kernel], axis=1)
    so = np.linalg.svd(O, compute_uv=False)
    if so[-1] <= _RANK_TOL * max(so[0], 1.0):
        raise DegenerateOrbit("an N-orbit direction vanishes at this point")
    sj = np.linalg.svd(J, compute_uv=False)
    if sj[-1] <= _RANK_TOL * max(sj[0], 1.0):
        raise SingularJacobian("moment map Jacobian is rank deficient")
    A = np.vstack([J, O.T / np.linalg.norm(O, axis=0)[:, None]])
    _, s, vt = np.linalg.svd(A)
    r = A.shape[0]
    if s[-1] <= _RANK_TOL * s[0]:
        raise DegenerateOrbit("orbit directions not transverse to level set constraints")
    return vt[r:].T


def metric_at(m: AmbientPoint, cfg: ProbeConfig,
              slice_basis: np.ndarray | None = None) -> MetricSample:
    """Quotient metric (and optionally its deformation) on a slice basis.

    The slice basis is a 4d x 4n matrix of ambient tangent vectors spanning
    a complement of the orbit directions in the tangent space of the level
    set; it defaults to an orthonormal basis of the horizontal space.
    """
    if m.d != cfg.spec.d:
        raise DimensionMismatch("point and spec disagree on d")
    x = m.real()
    B = horizontal_basis(x, cfg)
    S = B if slice_basis is None else np.asarray(slice_basis, dtype=float)
    E = B @ (B.T @ S)
    xi = killing_vector(x, cfg.a)
    xi_h = B @ (B.T @ xi)
    tiny = _RANK_TOL * max(1.0, float(x @ x))
    fiber = None
    if cfg.deformed:
        # work on the graph of mu_sigma inside H^d x Im H
        Js = np.tensordot(cfg.a, moment_jacobian(x), axes=1)
        Eg = np.vstack([E, Js @ E])
        Xg = np.concatenate([xi_h, Js @ xi_h])
        xi_norm2 = float(Xg @ Xg)
        if xi_norm2 <= tiny:
            raise DegenerateOrbit("sigma Killing field vanishes at this point")
        V1 = 1.0 / xi_norm2
        wvec = Eg.T @ Xg
        # G_X - w w^T V/(V+1), split so that nothing cancels:
        # the part orthogonal to xi plus the shrunken fiber term
        Eperp = Eg - np.outer(Xg, wvec) / xi_norm2
        G = Eperp.T @ Eperp + np.outer(wvec, wvec) / (xi_norm2 * (1.0 + xi_norm2))
        fiber = 1.0 / (V1 + 1.0)
    else:
        G = E.T @ E
        xi_norm2 = float(xi_h @ xi_h)
        V1 = math.inf if xi_norm2 <= tiny else 1.0 / xi_norm2
    G = 0.5 * (G + G.T)
    coords = None
    if xi_norm2 > tiny:
        coords = np.linalg.lstsq(E, xi_h, rcond=None)[0]
    return MetricSample(m, S, G, xi_norm2, V1, fiber, coords)


def gh_metric_tensor(x: np.ndarray) -> np.ndarray:
    """Closed-form Gibbons-Hawking metric on R^4 minus 0 with V = 1 + 1/(2r)."""
    if len(x) != 4:
        raise DimensionMismatch("the Gibbons-Hawking oracle needs d = 1")
    r = 0.5 * float(x @ x)
    V = 1.0 + 1.0 / (2.0 * r)
    J = moment_jacobian(x)[0]
    xi = killing_vector(x, np.ones(1))
    theta = xi / float(xi @ xi)
    return V * J.T @ J + np.outer(theta, theta) / V


def gh_oracle(m: AmbientPoint, slice_basis: np.ndarray | None = None) -> MetricSample:
    """Taub-NUT metric of H (d = 1, a = 1) in Gibbons-Hawking form.

    Raises:
        DimensionMismatch: unless d = 1.
    """
    if m.d != 1:
        raise DimensionMismatch("the Gibbons-Hawking oracle needs d = 1")
    x = m.real()
    S = np.eye(4) if slice_basis is None else np.asarray(slice_basis, dtype=float)
    r = 0.5 * float(x @ x)
    V = 1.0 + 1.0 / (2.0 * r)
    G = S.T @ gh_metric_tensor(x) @ S
    xi = killing_vector(x, np.ones(1))
    coords = np.linalg.lstsq(S, xi, rcond=None)[0]
    return MetricSample(m, S, 0.5 * (G + G.T), float(xi @ xi), 1.0 / (2.0 * r), 1.0 / V, coords)


# ---------------------------------------------------------------------------
# charts and curvature


class SliceChart:
    """Local chart of the quotient near a base point of the level set.

    Coordinates y in R^{4n} map to p(y) = m0 + E y + Nrm s, where E is an
    orthonormal horizontal basis at m0, Nrm spans the normal space of the
    level set at m0 and s solves mu_N(p) = -zeta by Newton iteration.
    """

    def __init__(self, m0: AmbientPoint, cfg: ProbeConfig, frame: np.ndarray | None = None):
        self.cfg = cfg
        self.x0 = m0.real()
        B = horizontal_basis(self.x0, cfg)
        self.E = B if frame is None else B @ (B.T @ np.asarray(frame, dtype=float))
        if cfg.spec.dim_N:
            J = _jac_N(self.x0, cfg)
            q, _ = np.linalg.qr(J.T)
            self.Nrm = q
        else:
            self.Nrm = np.zeros((len(self.x0), 0))

    @property
    def dim(self) -> int:
        return self.E.shape[1]

    def point_and_tangents(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = self.x0 + self.E @ y
        if self.Nrm.shape[1] == 0:
            return p, self.E
        s = np.zeros(self.Nrm.shape[1])
        for _ in range(self.cfg.max_newton):
            x = p + self.Nrm @ s
            F = _residual(x, self.cfg)
            JN = _jac_N(x, self.cfg) @ self.Nrm
            ds = np.linalg.solve(JN, -F)
            s = s + ds
            if np.linalg.norm(ds) <= 1e-15 * max(1.0, np.linalg.norm(x)):
                break
        else:
            raise NoConvergence("slice chart projection did not converge")
        x = p + self.Nrm @ s
        J = _jac_N(x, self.cfg)
        dsdy = -np.linalg.solve(J @ self.Nrm, J @ self.E)
        return x, self.E + self.Nrm @ dsdy

    def metric(self, y: np.ndarray) -> np.ndarray:
        x, T = self.point_and_tangents(y)
        return metric_at(AmbientPoint.from_real(x), self.cfg, slice_basis=T).G


def _fd_derivatives(Gfun: Callable[[np.ndarray], np.ndarray],
                    h: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Central differences with per-axis steps: (G, dG[a,i,j], ddG[a,b,i,j])."""
    dim = len(h)
    e = np.diag(h)
    G0 = Gfun(np.zeros(dim))
    plus = [Gfun(e[a]) for a in range(dim)]
    minus = [Gfun(-e[a]) for a in range(dim)]
    dG = np.array([(plus[a] - minus[a]) / (2 * h[a]) for a in range(dim)])
    ddG = np.zeros((dim, dim) + G0.shape)
    for a in range(dim):
        ddG[a, a] = (plus[a] - 2 * G0 + minus[a]) / (h[a] * h[a])
        for b in range(a + 1, dim):
            val = (Gfun(e[a] + e[b]) - Gfun(e[a] - e[b]) - Gfun(-e[a] + e[b])
                   + Gfun(-e[a] - e[b])) / (4 * h[a] * h[b])
            ddG[a, b] = val
            ddG[b, a] = val
    return G0, dG, ddG


def riemann_from_derivatives(G: np.ndarray, dG: np.ndarray, ddG: np.ndarray) -> np.ndarray:
    """Covariant Riemann tensor R[m,n,s,r] = g(R(d_m, d_n) d_s, d_r).

    Sign convention: R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y], so the
    sectional curvature of span(X, Y) is R(X, Y, Y, X) / |X ^ Y|^2.
    """
    Ginv = np.linalg.inv(G)
    # Gamma_low[k,i,j] = (d_i g_jk + d_j g_ik - d_k g_ij) / 2
    Gl = 0.5 * (np.einsum("ijk->kij", dG) + np.einsum("jik->kij", dG) - dG)
    Gam = np.einsum("rk,kij->rij", Ginv, Gl)
    # derivative of Gamma_low along m: dGl[m,k,i,j]
    dGl = 0.5 * (np.einsum("mijk->mkij", ddG) + np.einsum("mjik->mkij", ddG)
                 - np.einsum("mkij->mkij", ddG))
    dGinv = -np.einsum("ra,mab,bk->mrk", Ginv, dG, Ginv)
    dGam = np.einsum("mrk,kij->mrij", dGinv, Gl) + np.einsum("rk,mkij->mrij", Ginv, dGl)
    # R^r_{s m n} = d_m Gam^r_{n s} - d_n Gam^r_{m s} + Gam^r_{m l} Gam^l_{n s} - Gam^r_{n l} Gam^l_{m s}
    Rup = (np.einsum("mrns->rsmn", dGam) - np.einsum("nrms->rsmn", dGam)
           + np.einsum("rml,lns->rsmn", Gam, Gam) - np.einsum("rnl,lms->rsmn", Gam, Gam))
    # lower and reorder to R[m,n,s,r]
    return np.einsum("ar,rsmn->mnsa", G, Rup)


@dataclass(frozen=True)
class CurvatureReport:
    riemann: np.ndarray
    ricci_norm: float
    sectional: dict[tuple[int, int], float]
    bianchi_residual: float
    symmetry_residual: float
    error_estimate: float

    @property
    def max_abs_sectional(self) -> float:
        return max((abs(v) for v in self.sectional.values()), default=0.0)

    def to_dict(self) -> dict:
        return {
            "riemann": self.riemann.tolist(),
            "ricci_norm": self.ricci_norm,
            "sectional": [{"plane": list(k), "value": v} for k, v in sorted(self.sectional.items())],
            "bianchi_residual": self.bianchi_residual,
            "symmetry_residual": self.symmetry_residual,
            "error_estimate": self.error_estimate,
        }


def _extrapolate(arrays: list[np.ndarray]) -> np.ndarray:
    # steps halve from one entry to the next; error expansion in h^2
    for j in range(1, len(arrays)):
        f = 4.0 ** j
        arrays = [(f * arrays[i + 1] - arrays[i]) / (f - 1) for i in range(len(arrays) - 1)]
    return arrays[0]


def curvature_of_metric(Gfun: Callable[[np.ndarray], np.ndarray], h: float | Sequence[float],
                        dim: int | None = None, levels: int = 2, step_tolerance: float = 0.25,
                        floor: float = 1e-7) -> CurvatureReport:
    """FD curvature of a metric given in local coordinates around y = 0.

    Derivatives are taken at steps h, h/2, ..., h/2^levels.  The reported
    tensor extrapolates the first ``levels`` of them (central differences
    have even error expansions); the error estimate is its distance to the
    same extrapolation shifted by one halving.

    Raises:
        StepTooLarge: if the error estimate exceeds ``step_tolerance`` times
            the largest frame component plus ``floor``.
    """
    hv = np.asarray(h, dtype=float)
    if hv.ndim == 0:
        if dim is None:
            raise PreconditionFailed("dim is required with a scalar step")
        hv = np.full(dim, float(hv))
    dim = len(hv)
    tables = [_fd_derivatives(Gfun, hv / 2 ** k) for k in range(levels + 1)]
    G0 = tables[0][0]
    L = np.linalg.cholesky(G0)
    F = np.linalg.inv(L).T

    def frame_riemann(sub: list) -> np.ndarray:
        R = riemann_from_derivatives(G0, _extrapolate([t[1] for t in sub]),
                                     _extrapolate([t[2] for t in sub]))
        return np.einsum("ijkl,ia,jb,kc,ld->abcd", R, F, F, F, F)

    Rh = frame_riemann(tables[:levels])
    err = float(np.max(np.abs(Rh - frame_riemann(tables[1:]))))
    scale = float(np.max(np.abs(Rh)))
    if err > step_tolerance * scale + floor:
        raise StepTooLarge(f"Richardson levels disagree by {err:.3e} (scale {scale:.3e})")
    ric = np.einsum("abca->bc", Rh)
    sect = {(a, b): float(Rh[a, b, b, a]) for a in range(dim) for b in range(a + 1, dim)}
    bianchi = Rh + np.einsum("bcad->abcd", Rh) + np.einsum("cabd->abcd", Rh)
    sym = max(float(np.max(np.abs(Rh + np.einsum("jikl->ijkl", Rh)))),
              float(np.max(np.abs(Rh - np.einsum("klij->ijkl", Rh)))))
    return CurvatureReport(Rh, float(np.linalg.norm(ric)), sect,
                           float(np.max(np.abs(bianchi))), sym, err)


def curvature_probe(m: AmbientPoint, cfg: ProbeConfig) -> CurvatureReport:
    """FD curvature of the (deformed) quotient metric at an on-level point.

    The chart uses a frame that is orthonormal for the metric at m, which
    keeps the computation well conditioned when the fibre collapses or the
    base directions grow.  Each axis gets the step ``fd_step * max(1, |m|)``
    measured in ambient length.  The Riemann tensor is reported in that
    orthonormal frame.
    """
    base = SliceChart(m, cfg)
    G0 = base.metric(np.zeros(base.dim))
    frame = base.E @ np.linalg.inv(np.linalg.cholesky(G0)).T
    chart = SliceChart(m, cfg, frame)
    scale = cfg.fd_step * max(1.0, float(np.linalg.norm(chart.x0)))
    h = scale / np.linalg.norm(chart.E, axis=0)
    return curvature_of_metric(chart.metric, h, levels=cfg.richardson,
                               step_tolerance=cfg.step_tolerance, floor=cfg.curvature_floor)


# ---------------------------------------------------------------------------
# decay along rays


@dataclass(frozen=True)
class Ray:
    """Points base + R * direction, re-projected onto the level set."""

    base: AmbientPoint
    direction: np.ndarray

    def point(self, R: float, cfg: ProbeConfig) -> AmbientPoint:
        x = self.base.real() + R * np.asarray(self.direction, dtype=float)
        return level_project(AmbientPoint.from_real(x), cfg)


def _onto_sigma_cone(x: np.ndarray, a: np.ndarray, max_iter: int = 60) -> np.ndarray:
    # min-norm Newton onto {mu_sigma = 0}; the set is a cone, so only the
    # direction of the result matters
    for _ in range(max_iter):
        F = a @ moment_components(x)
        if np.linalg.norm(F) <= 1e-14 * float(x @ x):
            return x
        J = np.tensordot(a, moment_jacobian(x), axes=1)
        x = x + np.linalg.lstsq(J, -F, rcond=None)[0]
    raise NoConvergence("projection onto the sigma cone did not converge")


def random_rays(d: int, count: int, seed: int,
                cone: Sequence[float] | None = None) -> list[Ray]:
    """Seeded unit directions from the origin in R^{4d}.

    With ``cone = a`` the directions are drawn on the zero set of mu_sigma,
    so that the graph point (R u, mu_sigma(R u)) = (R u, 0) stays in H^d.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        v = rng.normal(size=4 * d)
        if cone is not None:
            v = _onto_sigma_cone(v, np.asarray(cone, dtype=float))
        out.append(Ray(AmbientPoint((0,) * d, (0,) * d), v / np.linalg.norm(v)))
    return out


@dataclass(frozen=True)
class DecayFit:
    quantity: str
    radius: str
    rho: tuple[float, ...]
    values: tuple[float, ...]
    exponent: float | None
    r2: float | None
    degenerate: bool

    def to_csv(self) -> str:
        lines = ["rho,value"]
        lines += [f"{r!r},{v!r}" for r, v in zip(self.rho, self.values)]
        return "\r\n".join(lines) + "\r\n"


QUANTITIES = ("V1", "MAX_SECTIONAL")


def radial_distance(x: np.ndarray, a: np.ndarray, radius: str) -> float:
    """Distance to the origin: in H^d x Im H on the graph, or in H^d."""
    if radius == "euclidean":
        return float(np.linalg.norm(x))
    if radius == "ambient":
        q = np.asarray(a) @ moment_components(x)
        return float(math.sqrt(x @ x + q @ q))
    raise ValueError(f"unknown radius {radius!r}")


def decay_fit(cfg: ProbeConfig, ray: Ray, quantity: str, radii: Sequence[float],
              radius: str = "ambient", noise_floor: float = 1e-10) -> DecayFit:
    """Least-squares slope of log(quantity) against log(rho) along a ray.

    ``radius="ambient"`` measures rho as the distance to the origin of the
    graph point (m, mu_sigma(m)) in H^d x Im H; ``"euclidean"`` uses |m|.
    Fits whose values fall below ``noise_floor`` are flagged degenerate.
    """
    if quantity not in QUANTITIES:
        raise ValueError(f"quantity must be one of {QUANTITIES}")
    radii = list(radii)
    if len(radii) < 4 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise PreconditionFailed("need at least 4 increasing radii")
    rhos, vals = [], []
    for R in radii:
        p = ray.point(R, cfg)
        x = p.real()
        if quantity == "V1":
            v = metric_at(p, cfg).V1
        else:
            v = curvature_probe(p, cfg).max_abs_sectional
        rhos.append(radial_distance(x, cfg.a, radius))
        vals.append(float(v))
    if min(vals) <= noise_floor or not all(math.isfinite(v) for v in vals):
        return DecayFit(quantity, radius, tuple(rhos), tuple(vals), None, None, True)
    lx, ly = np.log(rhos), np.log(vals)
    slope, icpt = np.polyfit(lx, ly, 1)
    pred = slope * lx + icpt
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(quantity, radius, tuple(rhos), tuple(vals), float(slope), r2, False)
