"""Pointwise extrinsic geometry of surfaces in flat R^4.

Everything here is vectorised over leading array axes: a :class:`Jet2` with
arrays of shape (..., 4) yields frames, second fundamental forms and
curvature values of shape (...,).

Curvature conventions: ``OmegaT = <B11, B22> - |B12|^2`` is the Gauss
curvature, ``OmegaN = (B11 - B22) ^ B12`` read on the oriented normal plane.
The ambient curvature hooks are kept explicitly and are zero (flat R^4).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .germ import Jet2

# index pairs of the basis e_ij (i < j) of Lambda^2 R^4
PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


class DegenerateJetError(ValueError):
    """Raised at rank-deficient (branch) points."""


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def wedge(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """2-vector a ^ b in the basis e12, e13, e14, e23, e24, e34."""
    return np.stack([a[..., i] * b[..., j] - a[..., j] * b[..., i] for i, j in PAIRS], axis=-1)


def ambient_tangent_curvature(frame) -> np.ndarray:
    # <R^M(e1,e2)e1,e2>; flat ambient
    return np.zeros(frame.e1.shape[:-1])


def ambient_normal_curvature(frame) -> np.ndarray:
    # <R^M(e1,e2)e3,e4>; flat ambient
    return np.zeros(frame.e1.shape[:-1])


@dataclass(frozen=True)
class AdaptedFrame:
    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray
    e4: np.ndarray
    # e_a = c[a, 0] * f_x + c[a, 1] * f_y
    coeffs: np.ndarray

    def matrix(self) -> np.ndarray:
        return np.stack([self.e1, self.e2, self.e3, self.e4], axis=-1)

    def rotate_normal(self, angle) -> "AdaptedFrame":
        c, s = np.cos(angle), np.sin(angle)
        c = np.asarray(c)[..., None]
        s = np.asarray(s)[..., None]
        return AdaptedFrame(self.e1, self.e2, c * self.e3 + s * self.e4, -s * self.e3 + c * self.e4, self.coeffs)


def adapted_frame(jet: Jet2, rank_tol: float = 1e-12) -> AdaptedFrame:
    """Gram-Schmidt tangent frame plus a positively oriented normal completion."""
    fx, fy = jet.fx, jet.fy
    lx = np.linalg.norm(fx, axis=-1)
    if np.any(lx <= rank_tol * (1 + np.linalg.norm(fy, axis=-1))):
        raise DegenerateJetError("f_x vanishes: rank-deficient jet")
    e1 = fx / lx[..., None]
    a = _dot(fy, e1)
    t = fy - a[..., None] * e1
    n2 = np.linalg.norm(t, axis=-1)
    if np.any(n2 <= rank_tol * np.linalg.norm(fy, axis=-1).clip(1e-300)) or np.any(n2 == 0):
        raise DegenerateJetError("f_x, f_y are dependent: rank-deficient jet")
    e2 = t / n2[..., None]
    eye = np.eye(4)
    # normal projections of the standard basis
    proj = eye - e1[..., :, None] * e1[..., None, :] - e2[..., :, None] * e2[..., None, :]
    norms = np.linalg.norm(proj, axis=-2)
    k3 = np.argmax(norms, axis=-1)
    v3 = np.take_along_axis(proj, k3[..., None, None].repeat(4, axis=-2), axis=-1)[..., 0]
    e3 = v3 / np.linalg.norm(v3, axis=-1)[..., None]
    proj2 = proj - e3[..., :, None] * e3[..., None, :]
    norms2 = np.linalg.norm(proj2, axis=-2)
    k4 = np.argmax(norms2, axis=-1)
    v4 = np.take_along_axis(proj2, k4[..., None, None].repeat(4, axis=-2), axis=-1)[..., 0]
    e4 = v4 / np.linalg.norm(v4, axis=-1)[..., None]
    det = np.linalg.det(np.stack([e1, e2, e3, e4], axis=-1))
    e4 = np.where(det[..., None] < 0, -e4, e4)
    coeffs = np.zeros(lx.shape + (2, 2))
    coeffs[..., 0, 0] = 1 / lx
    coeffs[..., 1, 0] = -a / (lx * n2)
    coeffs[..., 1, 1] = 1 / n2
    return AdaptedFrame(e1, e2, e3, e4, coeffs)


@dataclass(frozen=True)
class SecondFundamentalForm:
    """Coefficients over (e3, e4) of B(e1,e1), B(e1,e2), B(e2,e2); arrays (..., 2)."""

    B11: np.ndarray
    B12: np.ndarray
    B22: np.ndarray

    def vector(self, frame: AdaptedFrame, which: str) -> np.ndarray:
        b = getattr(self, which)
        return b[..., 0:1] * frame.e3 + b[..., 1:2] * frame.e4


def second_fundamental_form(jet: Jet2, frame: AdaptedFrame) -> SecondFundamentalForm:
    c = frame.coeffs
    H = ((jet.fxx, jet.fxy), (jet.fxy, jet.fyy))

    def B(a, b):
        v = sum(c[..., a, i, None] * c[..., b, j, None] * H[i][j] for i in range(2) for j in range(2))
        return np.stack([_dot(v, frame.e3), _dot(v, frame.e4)], axis=-1)

    return SecondFundamentalForm(B(0, 0), B(0, 1), B(1, 1))


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass(frozen=True)
class CurvatureSample:
    OmegaT: np.ndarray
    OmegaN: np.ndarray
    normB2: np.ndarray
    area_density: np.ndarray


def curvature_sample(sff: SecondFundamentalForm, frame: AdaptedFrame | None = None,
                     area_density=None) -> CurvatureSample:
    B11, B12, B22 = sff.B11, sff.B12, sff.B22
    OT = -_dot(B12, B12) + _dot(B11, B22)
    ON = _cross2(B11 - B22, B12)
    if frame is not None:
        OT = OT + ambient_tangent_curvature(frame)
        ON = ON + ambient_normal_curvature(frame)
    nB2 = _dot(B11, B11) + 2 * _dot(B12, B12) + _dot(B22, B22)
    if area_density is None:
        area_density = np.full(OT.shape, np.nan)
    return CurvatureSample(OT, ON, nB2, area_density)


def area_density(jet: Jet2) -> np.ndarray:
    E = _dot(jet.fx, jet.fx)
    F = _dot(jet.fx, jet.fy)
    G = _dot(jet.fy, jet.fy)
    return np.sqrt(np.maximum(E * G - F * F, 0.0))


def sample(jet: Jet2) -> CurvatureSample:
    frame = adapted_frame(jet)
    return curvature_sample(second_fundamental_form(jet, frame), frame, area_density(jet))


# ---------------------------------------------------------------------------
# tangent-plane lift into Lambda^2 = Lambda^+ (+) Lambda^-

SQ2 = np.sqrt(2.0)


def plane_bivector(jet: Jet2):
    """Unit 2-vector P of the tangent plane and its exact partials P_x, P_y."""
    W = wedge(jet.fx, jet.fy)
    Wx = wedge(jet.fxx, jet.fy) + wedge(jet.fx, jet.fxy)
    Wy = wedge(jet.fxy, jet.fy) + wedge(jet.fx, jet.fyy)
    n = np.linalg.norm(W, axis=-1)[..., None]
    P = W / n
    Px = Wx / n - P * _dot(P, Wx)[..., None] / n
    Py = Wy / n - P * _dot(P, Wy)[..., None] / n
    return P, Px, Py


def split_bivector(P: np.ndarray):
    """Coordinates of sqrt(2) * P on the bases omega_k^+ and omega_k^-."""
    p12, p13, p14, p23, p24, p34 = (P[..., k] for k in range(6))
    J = np.stack([p12 + p34, p13 - p24, p14 + p23], axis=-1)
    K = np.stack([p12 - p34, p13 + p24, p14 - p23], axis=-1)
    return J, K


def join_bivector(J: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Inverse of :func:`split_bivector`: returns (J + K)/sqrt(2) as a 2-vector."""
    J = np.asarray(J, dtype=float)
    K = np.asarray(K, dtype=float)
    p12 = (J[..., 0] + K[..., 0]) / 2
    p34 = (J[..., 0] - K[..., 0]) / 2
    p13 = (J[..., 1] + K[..., 1]) / 2
    p24 = (K[..., 1] - J[..., 1]) / 2
    p14 = (J[..., 2] + K[..., 2]) / 2
    p23 = (J[..., 2] - K[..., 2]) / 2
    return np.stack([p12, p13, p14, p23, p24, p34], axis=-1)


DENSITY_NAMES = ("OmegaT", "OmegaN", "normB2", "area", "liftArea", "normB", "Jpull", "Kpull", "B12wB11")


def densities(jet: Jet2) -> dict[str, np.ndarray]:
    """All integrands of the package as densities w.r.t. dx dy in chart coordinates.

    ``Jpull``/``Kpull`` are the pull-backs of the round area forms of the unit
    spheres of Lambda^+ and Lambda^- (outward orientation in the omega bases).
    ``liftArea`` uses the metric of R^4 plus |dP|^2 on the lift, i.e. unit
    spheres scaled by 1/sqrt(2).
    """
    frame = adapted_frame(jet)
    sff = second_fundamental_form(jet, frame)
    dA = area_density(jet)
    cs = curvature_sample(sff, frame, dA)
    P, Px, Py = plane_bivector(jet)
    J, K = split_bivector(P)
    Jx, Kx = split_bivector(Px)
    Jy, Ky = split_bivector(Py)
    G = np.empty(dA.shape + (2, 2))
    G[..., 0, 0] = _dot(jet.fx, jet.fx) + _dot(Px, Px)
    G[..., 0, 1] = G[..., 1, 0] = _dot(jet.fx, jet.fy) + _dot(Px, Py)
    G[..., 1, 1] = _dot(jet.fy, jet.fy) + _dot(Py, Py)
    lift = np.sqrt(np.maximum(np.linalg.det(G), 0.0))
    return {
        "OmegaT": cs.OmegaT * dA,
        "OmegaN": cs.OmegaN * dA,
        "normB2": cs.normB2 * dA,
        "area": dA,
        "liftArea": lift,
        "normB": np.sqrt(cs.normB2) * dA,
        "Jpull": _dot(J, np.cross(Jx, Jy)),
        "Kpull": _dot(K, np.cross(Kx, Ky)),
        "B12wB11": _cross2(sff.B12, sff.B11) * dA,
    }


# ---------------------------------------------------------------------------
# boundary integrands on level sets of |f - p|


def level_set_boundary(jet: Jet2, p, theta, r):
    """Boundary data of {|f - p| <= eps} traced as r = r(theta) in a polar chart.

    Returns (frame, sff, tau, dsdtheta, sign) where ``tau`` is the unit tangent
    of the level curve in the direction of increasing theta, ``dsdtheta`` the
    speed and ``sign`` = +1 where the curve is positively oriented as the
    boundary (outer strands), -1 otherwise.
    """
    frame = adapted_frame(jet)
    sff = second_fundamental_form(jet, frame)
    d = jet.f - np.asarray(p, dtype=float)
    c, s = np.cos(theta)[..., None], np.sin(theta)[..., None]
    f_r = c * jet.fx + s * jet.fy
    f_t = np.asarray(r)[..., None] * (-s * jet.fx + c * jet.fy)
    phi_r = 2 * _dot(d, f_r)
    phi_t = 2 * _dot(d, f_t)
    drdt = -phi_t / phi_r
    gamma_t = f_r * drdt[..., None] + f_t
    speed = np.linalg.norm(gamma_t, axis=-1)
    tau = gamma_t / speed[..., None]
    return frame, sff, d, tau, speed, np.sign(phi_r)


def _tangent_coords(frame: AdaptedFrame, v):
    return _dot(v, frame.e1), _dot(v, frame.e2)


def geodesic_curvature(frame, sff, d, tau) -> np.ndarray:
    """k_g of the level curve of |f - p|^2 through the point, w.r.t. the outward normal.

    For phi = |f - p|^2 restricted to the surface, Hess(tau, tau) =
    2 + 2 <f - p, B(tau, tau)> and |grad phi| = 2 |(f - p)^T|.
    """
    t1, t2 = _tangent_coords(frame, tau)
    Btt = (t1 * t1)[..., None] * sff.B11 + (2 * t1 * t2)[..., None] * sff.B12 + (t2 * t2)[..., None] * sff.B22
    Btt_vec = Btt[..., 0:1] * frame.e3 + Btt[..., 1:2] * frame.e4
    dt1, dt2 = _tangent_coords(frame, d)
    return (1 + _dot(d, Btt_vec)) / np.sqrt(dt1 * dt1 + dt2 * dt2)


def normal_connection_form(frame, sff, tau, X) -> tuple[np.ndarray, np.ndarray]:
    """omega^N(tau) for the normal projection X^N of a constant vector X.

    Uses the convention omega(u) = <nabla_u (J X^N), X^N>/|X^N|^2, i.e. the
    connection form <nabla e4, e3> of the frame e3 = X^N/|X^N|, e4 = J e3,
    whose differential is OmegaN. Returns (omega, |X^N|).
    """
    X = np.asarray(X, dtype=float)
    x3, x4 = _dot(X, frame.e3), _dot(X, frame.e4)
    xa = np.stack([_dot(X, frame.e1), _dot(X, frame.e2)], axis=-1)
    t1, t2 = _tangent_coords(frame, tau)
    # nabla^N_tau X^N = -sum_a <X, e_a> B(tau, e_a)
    B_t1 = t1[..., None] * sff.B11 + t2[..., None] * sff.B12
    B_t2 = t1[..., None] * sff.B12 + t2[..., None] * sff.B22
    dXN = -(xa[..., 0:1] * B_t1 + xa[..., 1:2] * B_t2)
    # J X^N = (-x4, x3); <nabla (J X^N), X^N> = -<nabla X^N, J X^N>
    JX = np.stack([-x4, x3], axis=-1)
    nrm2 = x3 * x3 + x4 * x4
    return -_dot(dXN, JX) / nrm2, np.sqrt(nrm2)


# ---------------------------------------------------------------------------
# integrals over Sigma_s^eps (thin wrappers around the quadrature engine)

TWO_FORMS = ("OmegaT", "OmegaN", "normB2", "area", "liftArea")


def integrate_2form(family, s: float, region, integrand: str = "OmegaT"):
    """Integral of one density over a region of Sigma_s: returns (value, error, converged)."""
    from .quadrature import integrate_family

    if integrand not in DENSITY_NAMES:
        raise ValueError(f"unknown integrand {integrand!r}; choose from {DENSITY_NAMES}")
    res = integrate_family(family, s, region, [integrand], drive=[integrand])
    return res.values[integrand], res.errors[integrand], res.converged


def boundary_integral(family, s: float, eps: float, form: str = "k_g", X=None):
    """Line integral of ``k_g`` or ``omegaN`` (for the normal part of X) over the boundary."""
    from .quadrature import boundary_integral as _bi

    if form == "omegaN" and X is None:
        raise ValueError("omegaN needs a framing vector X")
    return _bi(family, s, eps, form, X)[0]


@dataclass(frozen=True)
class EulerEstimate:
    chi_raw: float
    chi: int | None
    curvature: float
    boundary: float


def gauss_bonnet_euler(family, s: float, eps: float, rel_tol: float = 1e-4, snap: float = 0.1) -> EulerEstimate:
    """chi(Sigma_s^eps) = (int OmegaT + int_boundary k_g) / 2 pi."""
    from .quadrature import boundary_integral as _bi, region_integrals

    curv = region_integrals(family, s, eps, rel_tol).values["OmegaT"]
    kg = _bi(family, s, eps, "k_g")[0]
    raw = (curv + kg) / (2 * np.pi)
    k = int(np.rint(raw))
    return EulerEstimate(raw, k if abs(raw - k) < snap else None, curv, kg)
