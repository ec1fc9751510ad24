"""Oriented 2-planes of R^4 as S^2 x S^2 and the tangent-plane lift of surfaces.

A unit simple 2-vector P splits as sqrt(2) P = J + K with J in the unit
sphere of Lambda^+ and K in that of Lambda^-. Bubble degrees are the
concentrated parts of the pulled-back area forms of the two spheres.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffgeo import PAIRS, join_bivector, plane_bivector, split_bivector, wedge
from .germ import ImplicitChart, Jet2, SurfaceFamily, eval_jet, jets_at

SQ2 = np.sqrt(2.0)
FOUR_PI = 4 * np.pi


def sphere_pullback(v: np.ndarray, vx: np.ndarray, vy: np.ndarray) -> np.ndarray:
    """Round area form of the unit sphere at v evaluated on (vx, vy), outward orientation."""
    return np.einsum("...i,...i->...", v, np.cross(vx, vy))


@dataclass(frozen=True)
class GrassmannPoint:
    Jplus: np.ndarray
    Kminus: np.ndarray

    def __post_init__(self):
        for name in ("Jplus", "Kminus"):
            v = np.asarray(getattr(self, name), dtype=float)
            if np.max(np.abs(np.linalg.norm(v, axis=-1) - 1)) > 1e-10:
                raise ValueError(f"{name} must be a unit vector")
            object.__setattr__(self, name, v)

    @property
    def bivector(self) -> np.ndarray:
        """(J + K)/sqrt(2) as a 2-vector in the basis e12, e13, e14, e23, e24, e34."""
        return join_bivector(self.Jplus, self.Kminus)

    @classmethod
    def from_bivector(cls, P: np.ndarray) -> "GrassmannPoint":
        J, K = split_bivector(np.asarray(P, dtype=float))
        return cls(J, K)


def lift_point(jet: Jet2) -> GrassmannPoint:
    """Tangent plane of an immersed jet as a point of S^2 x S^2."""
    W = wedge(jet.fx, jet.fy)
    n = np.linalg.norm(W, axis=-1)
    if np.any(n < 1e-14 * np.maximum(1.0, np.linalg.norm(jet.fx, axis=-1) ** 2)):
        raise ValueError("rank-deficient jet: no tangent plane")
    return GrassmannPoint.from_bivector(W / n[..., None])


# ---------------------------------------------------------------------------
# the complex structure on Hom(P, P-perp)


def bivector_matrix(P: np.ndarray) -> np.ndarray:
    """Antisymmetric 4x4 matrix of a 2-vector."""
    M = np.zeros(P.shape[:-1] + (4, 4))
    for k, (i, j) in enumerate(PAIRS):
        M[..., i, j] = P[..., k]
        M[..., j, i] = -P[..., k]
    return M


def plane_frame(P: np.ndarray) -> np.ndarray:
    """Positive orthonormal frame (e1, e2, e3, e4) with e1 ^ e2 = P (single plane)."""
    M = bivector_matrix(np.asarray(P, dtype=float))
    col = int(np.argmax(np.linalg.norm(M, axis=0)))
    e1 = M[:, col] / np.linalg.norm(M[:, col])
    e2 = -M @ e1
    q, _ = np.linalg.qr(np.column_stack([e1, e2, np.eye(4)]))
    F = np.vstack([e1, e2, q[:, 2], q[:, 3]])
    if np.linalg.det(F) < 0:
        F[3] = -F[3]
    return F


def _hom_from_tangent(F: np.ndarray, V: np.ndarray):
    """Phi with V = Phi(e1) ^ e2 + e1 ^ Phi(e2), Phi(e_i) in span(e3, e4)."""
    M = bivector_matrix(V)
    # <V, e_a ^ e2> = Phi(e1)_a and <V, e1 ^ e_a> = Phi(e2)_a for a = 3, 4
    phi1 = np.array([F[a] @ M @ F[1] for a in (2, 3)])
    phi2 = np.array([F[0] @ M @ F[a] for a in (2, 3)])
    resid = V - _tangent_from_hom(F, phi1, phi2)
    return phi1, phi2, float(np.linalg.norm(resid))


def _tangent_from_hom(F, phi1, phi2) -> np.ndarray:
    v1 = phi1[0] * F[2] + phi1[1] * F[3]
    v2 = phi2[0] * F[2] + phi2[1] * F[3]
    return wedge(v1, F[1]) + wedge(F[0], v2)


def i_action(point: GrassmannPoint | np.ndarray, V: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Complex structure (I Phi)(X) = Phi(J X) on a tangent 2-vector V at the plane P.

    ``point`` is a GrassmannPoint or the unit 2-vector P itself.
    """
    P = point.bivector if isinstance(point, GrassmannPoint) else np.asarray(point, dtype=float)
    F = plane_frame(P)
    phi1, phi2, resid = _hom_from_tangent(F, np.asarray(V, dtype=float))
    if resid > tol * max(1.0, float(np.linalg.norm(V))):
        raise ValueError(f"vector is not tangent to the Grassmannian at P (residual {resid:.2e})")
    # J e1 = e2, J e2 = -e1
    return _tangent_from_hom(F, phi2, -phi1)


def hodge_star(V: np.ndarray) -> np.ndarray:
    """Hodge star on 2-vectors of oriented R^4."""
    v12, v13, v14, v23, v24, v34 = (V[..., k] for k in range(6))
    return np.stack([v34, -v24, v23, v14, -v13, v12], axis=-1)


def e(i: int, j: int) -> np.ndarray:
    """Basis 2-vector e_i ^ e_j (1-based indices)."""
    a, b = np.zeros(4), np.zeros(4)
    a[i - 1] = 1
    b[j - 1] = 1
    return wedge(a, b)


def complex_structure_table() -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """I on the adapted basis at P1 = e1^e2: name -> (computed, expected)."""
    P1 = e(1, 2)
    P2, P3 = e(1, 3), e(1, 4)
    sP2, sP3 = hodge_star(P2), hodge_star(P3)
    return {
        "I P2 = -*P3": (i_action(P1, P2), -sP3),
        "I *P2 = -P3": (i_action(P1, sP2), -P3),
        "I P3 = *P2": (i_action(P1, P3), sP2),
        "I *P3 = P2": (i_action(P1, sP3), P2),
    }


def random_tangent(P: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    F = plane_frame(P)
    return _tangent_from_hom(F, rng.normal(size=2), rng.normal(size=2))


# ---------------------------------------------------------------------------
# Eells-Salamon identity


def es_residual_jet(jet: Jet2) -> np.ndarray:
    """|nabla_{e2} P - I nabla_{e1} P| with exact derivatives of the lift."""
    from .diffgeo import adapted_frame

    frame = adapted_frame(jet)
    P, Px, Py = plane_bivector(jet)
    c = frame.coeffs
    D1 = c[..., 0, 0, None] * Px + c[..., 0, 1, None] * Py
    D2 = c[..., 1, 0, None] * Px + c[..., 1, 1, None] * Py
    flatP, flat1, flat2 = P.reshape(-1, 6), D1.reshape(-1, 6), D2.reshape(-1, 6)
    out = np.array([np.linalg.norm(flat2[k] - i_action(flatP[k], flat1[k], tol=1e-6))
                    for k in range(len(flatP))])
    return out.reshape(P.shape[:-1])


def es_residual(family: SurfaceFamily, s: float, z) -> np.ndarray:
    """Eells-Salamon residual at parameter points of the first family chart (all sheets)."""
    chart = family.charts_at(s)[0]
    jet = jets_at(chart, np.atleast_1d(np.asarray(z, dtype=complex)), s)
    res = es_residual_jet(jet)
    return res.max(axis=-1) if isinstance(chart, ImplicitChart) else res


# ---------------------------------------------------------------------------
# degrees and lift area


@dataclass
class DegreePair:
    a_raw: float
    b_raw: float
    a: float | None
    b: float | None
    table: list[tuple[float, float, float, float]]  # (eps, s, a(eps, s), b(eps, s))
    step: float = 1.0  # 1 for integer snapping, 0.5 for half-integers

    def consistent_with(self, muT: float, muN: float, tol: float = 0.15) -> bool:
        return abs(self.a_raw + self.b_raw - muT) < tol and abs(self.a_raw - self.b_raw - muN) < tol


def _snap(x: float, step: float, threshold: float) -> float | None:
    k = step * np.rint(x / step)
    return float(k) if abs(x - k) < threshold else None


def bubble_degrees(family: SurfaceFamily, schedule=None) -> DegreePair:
    """Degrees of the concentrated lift on the Lambda^+ and Lambda^- spheres."""
    from .milnor import LimitSchedule, compute_table, extrapolate

    schedule = schedule or LimitSchedule.for_family(family)
    table = compute_table(family, schedule)
    a_of = lambda t: -t.diff("Jpull") / FOUR_PI  # noqa: E731
    b_of = lambda t: t.diff("Kpull") / FOUR_PI  # noqa: E731
    a_raw = extrapolate(table, schedule, a_of)[0]
    b_raw = extrapolate(table, schedule, b_of)[0]
    minimal = family.has("minimal") or family.has("holomorphic")
    step = 1.0 if minimal else 0.5
    thr = schedule.snap if minimal else schedule.snap / 2
    rows = [(t.eps, t.s, a_of(t), b_of(t)) for t in table]
    return DegreePair(a_raw, b_raw, _snap(a_raw, step, thr), _snap(b_raw, step, thr), rows, step)


def fiber_degree(which: str = "minus", n: int = 64) -> float:
    """Degree of a full fiber sphere {J fixed, K over S^2} (or the reverse) under the pull-back form.

    Built as an actual family of planes P(theta, phi) = (J0 + K(theta, phi))/sqrt(2)
    and integrated with the same split/pull-back code as surfaces use.
    """
    x, w = np.polynomial.legendre.leggauss(n)
    th = 0.5 * np.pi * (x + 1)
    wt = 0.5 * np.pi * w
    ph = 2 * np.pi * np.arange(2 * n) / (2 * n)
    T, F = np.meshgrid(th, ph, indexing="ij")
    V = np.stack([np.sin(T) * np.cos(F), np.sin(T) * np.sin(F), np.cos(T)], axis=-1)
    Vt = np.stack([np.cos(T) * np.cos(F), np.cos(T) * np.sin(F), -np.sin(T)], axis=-1)
    Vf = np.stack([-np.sin(T) * np.sin(F), np.sin(T) * np.cos(F), 0 * T], axis=-1)
    fixed = np.zeros(V.shape)
    fixed[..., 0] = 1
    zero = np.zeros(V.shape)
    if which == "minus":
        P, Pt, Pf = join_bivector(fixed, V), join_bivector(zero, Vt), join_bivector(zero, Vf)
        _, K = split_bivector(P)
        _, Kt = split_bivector(Pt)
        _, Kf = split_bivector(Pf)
        dens = sphere_pullback(K, Kt, Kf)
    else:
        P, Pt, Pf = join_bivector(V, fixed), join_bivector(Vt, zero), join_bivector(Vf, zero)
        J, _ = split_bivector(P)
        Jt, _ = split_bivector(Pt)
        Jf, _ = split_bivector(Pf)
        dens = sphere_pullback(J, Jt, Jf)
    return float(np.sum(dens * wt[:, None]) * (2 * np.pi / (2 * n)) / FOUR_PI)


@dataclass
class LiftAreaReport:
    s: float
    eps: float
    lift_area: float
    area: float
    int_normB: float
    int_normB2: float

    @property
    def bound(self) -> float:
        return self.area + 2 * self.int_normB + 4 * self.int_normB2

    @property
    def flat(self) -> bool:
        return self.int_normB2 < 1e-10 * max(1.0, self.area)

    def holds(self, slack: float = 0.05, rtol: float = 1e-8) -> bool:
        """lift <= (1 - slack) * bound, or equality up to rtol when B vanishes."""
        if self.flat:
            return self.lift_area <= self.bound * (1 + rtol)
        return self.lift_area <= (1 - slack) * self.bound


def lift_area_check(family: SurfaceFamily, s: float, eps: float, rel_tol: float = 1e-4) -> LiftAreaReport:
    from .quadrature import region_integrals

    r = region_integrals(family, s, eps, rel_tol)
    v = r.values
    return LiftAreaReport(s, eps, v["liftArea"], v["area"], v["normB"], v["normB2"])


def lift_area_bounds(family: SurfaceFamily, eps: float | None = None, rel_tol: float = 1e-4):
    """Lift areas over the s-schedule and their common bound C3 (the maximum)."""
    eps = eps if eps is not None else family.eps_schedule[0]
    reports = [lift_area_check(family, s, eps, rel_tol) for s in family.s_schedule]
    return reports, max(r.lift_area for r in reports)


def holomorphic_jplus_constant(chart, points, s: float) -> float:
    """max deviation of J+ from (1, 0, 0) over sample points of an explicit chart."""
    g = lift_point(eval_jet(chart, np.asarray(points), s))
    return float(np.max(np.abs(g.Jplus - np.array([1.0, 0.0, 0.0]))))
