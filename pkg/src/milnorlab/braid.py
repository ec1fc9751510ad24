"""Links cut out by small spheres, linking numbers and crossing numbers.

The slice ``Sigma_s cap S(p, eps)`` is traced at equispaced angles of each
chart, strands are joined into closed polylines and oriented as the boundary
of ``Sigma_s^eps``. Linking numbers are Gauss integrals after stereographic
projection of the sphere to R^3; the algebraic crossing number is the linking
number of the slice with its push-off along a constant vector field.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .diffgeo import adapted_frame
from .germ import Jet2, SurfaceFamily
from .quadrature import RegionError, trace_boundary

N_VERTICES = 720


class SliceError(RuntimeError):
    pass


@dataclass
class SliceComponent:
    """Closed oriented polyline; ``points[0] == points[-1]``."""

    points: np.ndarray  # (M + 1, 4)
    params: np.ndarray  # (M,) chart parameters (base point for implicit charts)
    chart: str
    jet: Jet2 = field(repr=False)  # (M,) jets at the vertices
    multiplicity: int = 1

    @property
    def vertices(self) -> np.ndarray:
        return self.points[:-1]

    def reversed(self) -> "SliceComponent":
        idx = np.arange(len(self.params))[::-1]
        pts = self.vertices[idx]
        return SliceComponent(np.vstack([pts, pts[:1]]), self.params[idx], self.chart, self.jet[idx],
                              self.multiplicity)


@dataclass
class SphereSlice:
    eps: float
    s: float
    p: np.ndarray
    components: list[SliceComponent]
    eps_requested: float

    def n_vertices(self) -> int:
        return sum(len(c.params) for c in self.components)

    def sphere_residual(self) -> float:
        return max(float(np.max(np.abs(np.linalg.norm(c.vertices - self.p, axis=1) - self.eps)))
                   for c in self.components)

    def min_separation(self, skip: int = 20) -> float:
        """Smallest distance between vertices more than ``skip`` steps apart, in units of the step."""
        pts = np.concatenate([c.vertices for c in self.components])
        owner = np.concatenate([np.full(len(c.params), i) for i, c in enumerate(self.components)])
        index = np.concatenate([np.arange(len(c.params)) for c in self.components])
        sizes = np.array([len(c.params) for c in self.components])
        step = max(float(np.max(np.linalg.norm(np.diff(c.points, axis=0), axis=1))) for c in self.components)
        d = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
        same = owner[:, None] == owner[None, :]
        gap = np.abs(index[:, None] - index[None, :])
        gap = np.minimum(gap, sizes[owner][:, None] - gap)
        d[same & (gap <= skip)] = np.inf
        return float(np.min(d) / step)

    def embedded(self, factor: float = 10.0) -> bool:
        return self.min_separation() > factor

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["component", "t", "x1", "x2", "x3", "x4"])
        for i, c in enumerate(self.components):
            m = len(c.params)
            for j, x in enumerate(c.points):
                w.writerow([i, f"{j / m:.8f}"] + [f"{v:.12e}" for v in x])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# tracing


def _components_from_trace(tr) -> list[SliceComponent]:
    M, nb = tr.pos.shape[:2]
    # follow columns continuously in theta (sheets of implicit charts may swap)
    perm = np.zeros((M, nb), dtype=int)
    perm[0] = np.arange(nb)
    for j in range(1, M):
        prev = tr.pos[j - 1, perm[j - 1]]
        cost = np.linalg.norm(prev[:, None] - tr.pos[j][None, :], axis=-1)
        perm[j] = linear_sum_assignment(cost)[1]
    last = tr.pos[M - 1, perm[M - 1]]
    cost = np.linalg.norm(last[:, None] - tr.pos[0][None, :], axis=-1)
    wrap = linear_sum_assignment(cost)[1]  # strand k continues as strand wrap[k] after a full turn
    seen = np.zeros(nb, dtype=bool)
    comps = []
    for k0 in range(nb):
        if seen[k0]:
            continue
        cols, k = [], k0
        while not seen[k]:
            seen[k] = True
            cols.append(k)
            k = wrap[k]
        rows = np.concatenate([np.arange(M) for _ in cols])
        which = np.concatenate([perm[:, c] for c in cols])
        pts = tr.pos[rows, which]
        signs = tr.sign[rows, which]
        if np.any(signs != signs[0]):
            raise SliceError(f"chart {tr.chart_name!r}: inconsistent boundary orientation along a component")
        comp = SliceComponent(np.vstack([pts, pts[:1]]), tr.base[rows, which], tr.chart_name,
                              tr.jet[rows, which], tr.multiplicity)
        comps.append(comp if signs[0] > 0 else comp.reversed())
    return comps


def slice_sphere(family: SurfaceFamily, s: float, eps: float, n_vertices: int = N_VERTICES,
                 nudges: int = 3) -> SphereSlice:
    """Oriented link Sigma_s cap S(p, eps); eps is nudged by +1% when not transverse."""
    e = eps
    for attempt in range(nudges + 1):
        try:
            comps = []
            for chart in family.charts_at(s):
                comps.extend(_components_from_trace(trace_boundary(chart, s, family.p, e, n_vertices)))
            return SphereSlice(e, s, np.asarray(family.p, dtype=float), comps, eps)
        except RegionError as exc:
            if "transverse" not in str(exc) or attempt == nudges:
                raise SliceError(str(exc)) from exc
            e *= 1.01
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# planes and the axis test


def branch_planes(family: SurfaceFamily, radius: float = 1e-3) -> list[np.ndarray]:
    """Orthonormal (2, 4) bases of the tangent cones of the limit charts at p."""
    out = []
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    for chart in family.limit_charts():
        pos = chart.position(radius * np.exp(1j * th), 0.0) - np.asarray(family.p)
        vt = np.linalg.svd(pos, full_matrices=False)[2]
        basis = vt[:2]
        # orient as the chart: the loop must wind positively in the plane
        xy = pos @ basis.T
        wind = np.sum(np.diff(np.unwrap(np.arctan2(xy[:, 1], xy[:, 0]))))
        if wind < 0:
            basis = basis[[1, 0]]
        out.append(basis)
    return out


def complement_basis(P: np.ndarray) -> np.ndarray:
    """Orthonormal basis (f3, f4) of P-perp with (P, f3, f4) positively oriented."""
    q, _ = np.linalg.qr(np.vstack([P, np.eye(4)]).T)
    Q = q[:, :4].T.copy()
    Q[:2] = P
    for k in (2, 3):
        v = Q[k] - Q[:k].T @ (Q[:k] @ Q[k])
        Q[k] = v / np.linalg.norm(v)
    if np.linalg.det(Q) < 0:
        Q[3] = -Q[3]
    return Q[2:]


def winding_about(comp: SliceComponent, basis: np.ndarray, p) -> float:
    xy = (comp.points - p) @ basis.T
    ang = np.unwrap(np.arctan2(xy[:, 1], xy[:, 0]))
    return float((ang[-1] - ang[0]) / (2 * np.pi))


@dataclass
class AxisReport:
    min_radius2: float
    min_angular: float
    verdict: bool


def axis_test(sl: SphereSlice, P: np.ndarray, radius_tol: float = 1e-6, angular_tol: float = 1e-8) -> AxisReport:
    """Monotone winding of the slice around the great circle S(p, eps) cap (p + P).

    Coordinates x1, x2 are taken in P-perp (relative to eps); derivatives by
    central differences along the polylines.
    """
    F = complement_basis(np.asarray(P, dtype=float))
    r2, ang = np.inf, np.inf
    for c in sl.components:
        x = (c.vertices - sl.p) @ F.T / sl.eps
        dx = (np.roll(x, -1, axis=0) - np.roll(x, 1, axis=0)) / 2 * len(x)
        r2 = min(r2, float(np.min(np.sum(x * x, axis=1))))
        w = x[:, 0] * dx[:, 1] - x[:, 1] * dx[:, 0]
        ang = min(ang, float(np.min(np.abs(w))) if np.all(np.sign(w) == np.sign(w[0])) else 0.0)
    return AxisReport(r2, ang, bool(r2 > radius_tol and ang > angular_tol))


def strand_count(sl: SphereSlice, planes: list[np.ndarray]) -> int:
    """Sum over components of the winding of their projection to the best branch plane."""
    total = 0
    for c in sl.components:
        best, wind = -1.0, 0.0
        for P in planes:
            xy = (c.vertices - sl.p) @ P.T
            rmin = float(np.min(np.sum(xy * xy, axis=1)))
            if rmin > best:
                best, wind = rmin, winding_about(c, P, sl.p)
        total += int(np.rint(abs(wind))) * c.multiplicity
    return total


# ---------------------------------------------------------------------------
# linking numbers


def _fibonacci_sphere(n: int) -> np.ndarray:
    """Quasi-uniform points on S^3 (deterministic)."""
    rng = np.random.default_rng(12345)
    v = rng.normal(size=(n, 4))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


_POLE_CANDIDATES = _fibonacci_sphere(2000)


def choose_pole(curves, center, radius) -> np.ndarray:
    """Unit vector u maximising the distance of center + radius u to every vertex."""
    pts = np.concatenate([(c - center) / radius for c in curves])
    best, best_d = None, -1.0
    for chunk in np.array_split(_POLE_CANDIDATES, 8):
        d = np.min(np.linalg.norm(chunk[:, None] - pts[None], axis=-1), axis=1)
        i = int(np.argmax(d))
        if d[i] > best_d:
            best, best_d = chunk[i], float(d[i])
    return best


def stereographic(points, center, radius, pole) -> np.ndarray:
    """Projection of S(center, radius) minus the pole onto R^3, orientation preserving.

    The basis (v1, v2, v3) of pole-perp is chosen with det(-pole, v1, v2, v3) = +1
    so that near the antipode the map is an oriented chart of the boundary sphere.
    """
    u = pole / np.linalg.norm(pole)
    q, _ = np.linalg.qr(np.column_stack([u, np.eye(4)]))
    V = q[:, 1:4].T
    if np.linalg.det(np.vstack([-u, V])) < 0:
        V[2] = -V[2]
    y = (np.asarray(points) - center) / radius
    t = y @ u
    return (y @ V.T) / (1 - t)[..., None]


def _polygon_gauss(A: np.ndarray, B: np.ndarray, chunk: int = 512) -> float:
    """Gauss integral of two closed polygons, exact for each pair of straight segments."""
    a0, a1 = A[:-1], A[1:]
    b0, b1 = B[:-1], B[1:]
    total = 0.0
    for i in range(0, len(a0), chunk):
        p1, p2 = a0[i:i + chunk, None], a1[i:i + chunk, None]
        p3, p4 = b0[None], b1[None]
        r13, r14, r23, r24 = p3 - p1, p4 - p1, p3 - p2, p4 - p2
        n = [np.cross(r13, r14), np.cross(r14, r24), np.cross(r24, r23), np.cross(r23, r13)]
        n = [v / np.maximum(np.linalg.norm(v, axis=-1, keepdims=True), 1e-300) for v in n]
        om = sum(np.arcsin(np.clip(np.sum(n[k] * n[(k + 1) % 4], axis=-1), -1, 1)) for k in range(4))
        sgn = np.sign(np.sum(np.cross(p4 - p3, p2 - p1) * r13, axis=-1))
        total += float(np.sum(om * sgn))
    return total / (4 * np.pi)


def _midpoint_gauss(A: np.ndarray, B: np.ndarray, chunk: int = 512) -> float:
    """Gauss double integral by the midpoint rule over segment pairs."""
    da, db = np.diff(A, axis=0), np.diff(B, axis=0)
    ma, mb = 0.5 * (A[:-1] + A[1:]), 0.5 * (B[:-1] + B[1:])
    total = 0.0
    for i in range(0, len(ma), chunk):
        r = ma[i:i + chunk, None] - mb[None]
        cr = np.cross(da[i:i + chunk, None], db[None])
        total += float(np.sum(np.sum(r * cr, axis=-1) / np.linalg.norm(r, axis=-1) ** 3))
    return total / (4 * np.pi)


@dataclass(frozen=True)
class LinkingNumber:
    raw: float
    value: int | None

    @property
    def deviation(self) -> float:
        return abs(self.raw - np.rint(self.raw))


def gauss_linking(A, B, center=None, radius=None, method: str = "polygon", snap: float = 0.1) -> LinkingNumber:
    """Linking number of closed polylines on a 3-sphere (or in R^3 when ``center`` is None).

    ``A`` and ``B`` are (M + 1, d) arrays with first = last vertex. The pole of
    the stereographic projection depends on both curves only through a
    symmetric function, so lk(A, B) and lk(B, A) use the same chart.
    """
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    if center is not None:
        pole = choose_pole(sorted([A, B], key=lambda c: c.tobytes()), center, radius)
        gap = min(np.min(np.linalg.norm((A - center) / radius - pole, axis=1)),
                  np.min(np.linalg.norm((B - center) / radius - pole, axis=1)))
        if gap < 1e-3:
            raise SliceError("no stereographic pole away from the curves")
        A, B = stereographic(A, center, radius, pole), stereographic(B, center, radius, pole)
    d = np.min(np.linalg.norm(A[:-1, None] - B[None, :-1], axis=-1)) if len(A) * len(B) < 4e6 else np.inf
    if d == 0:
        raise SliceError("curves intersect")
    raw = _polygon_gauss(A, B) if method == "polygon" else _midpoint_gauss(A, B)
    k = int(np.rint(raw))
    return LinkingNumber(raw, k if abs(raw - k) < snap else None)


def hopf_reference(n_vertices: int = N_VERTICES, method: str = "midpoint") -> LinkingNumber:
    """lk of (cos t, sin t, 0, 0) and (0, 0, cos u, sin u) on the unit sphere."""
    t = 2 * np.pi * np.arange(n_vertices + 1) / n_vertices
    c1 = np.stack([np.cos(t), np.sin(t), 0 * t, 0 * t], axis=1)
    c2 = np.stack([0 * t, 0 * t, np.cos(t), np.sin(t)], axis=1)
    c1[-1], c2[-1] = c1[0], c2[0]
    return gauss_linking(c1, c2, np.zeros(4), 1.0, method=method)


# ---------------------------------------------------------------------------
# crossing number


def push_off(comp: SliceComponent, X, delta: float, p, eps: float) -> np.ndarray:
    """Radial reprojection of K + delta X onto the sphere."""
    y = comp.points - p + delta * np.asarray(X, dtype=float)
    return p + eps * y / np.linalg.norm(y, axis=1, keepdims=True)


def normal_part_min(sl: SphereSlice, X) -> float:
    """min over vertices of |X^N| / |X| (X must stay transverse to the surface)."""
    X = np.asarray(X, dtype=float)
    out = np.inf
    for c in sl.components:
        fr = adapted_frame(c.jet)
        xn = np.hypot(fr.e3 @ X, fr.e4 @ X)
        out = min(out, float(np.min(xn)))
    return out / np.linalg.norm(X)


@dataclass
class BraidInvariants:
    n: int
    e: int | None
    e_raw: float
    lk: np.ndarray  # lk[i, j] = lk(K_i, K_j); diagonal holds lk(K_i, K_i-hat)
    lk_raw: np.ndarray
    X: np.ndarray
    delta: float
    transversality: float


def crossing_number(sl: SphereSlice, X, delta: float | None = None, planes=None, snap: float = 0.1,
                    min_transversality: float = 1e-3) -> BraidInvariants:
    """e = lk(K, K-hat) with K-hat the push-off of the whole slice along X."""
    X = np.asarray(X, dtype=float)
    tr = normal_part_min(sl, X)
    if tr < min_transversality:
        raise SliceError(f"framing vector is tangent to the surface on the slice (|X^N| = {tr:.2e})")
    delta = sl.eps / 100 if delta is None else delta
    comps = sl.components
    for attempt in range(2):
        hats = [push_off(c, X, delta, sl.p, sl.eps) for c in comps]
        gap = min(float(np.min(np.linalg.norm(h[:-1, None] - c.vertices[None], axis=-1)))
                  for h in hats for c in comps)
        if gap > 0.2 * delta * tr:
            break
        if attempt == 1:
            raise SliceError("push-off collides with the slice")
        delta /= 2
    k = len(comps)
    raw = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            other = hats[j] if i == j else comps[j].points
            raw[i, j] = gauss_linking(comps[i].points, other, sl.p, sl.eps).raw
    mult = np.array([c.multiplicity for c in comps], dtype=float)
    # off the diagonal lk(K_i, K_j-hat) = lk(K_i, K_j): the push-off is an isotopy
    # in the complement of K_i because the gap check above passed
    e_raw = float(mult @ raw @ mult)
    lk = np.rint(raw).astype(int)
    e = int(np.rint(e_raw))
    n = strand_count(sl, planes) if planes else 0
    return BraidInvariants(n, e if abs(e_raw - e) < snap else None, e_raw, lk, raw, X, delta, tr)


def framing_vectors(family: SurfaceFamily, planes=None) -> list[np.ndarray]:
    """Candidate constant framings: rotations inside P-perp for one branch, generic otherwise."""
    planes = planes if planes is not None else branch_planes(family)
    if len(planes) == 1:
        F = complement_basis(planes[0])
        return [np.cos(a) * F[0] + np.sin(a) * F[1] for a in (np.pi / 2, np.pi / 2 + 0.7, np.pi / 2 - 0.9)]
    generic = np.array([[0.3, -0.2, 0.7, 0.5], [0.6, 0.1, -0.3, 0.7], [-0.4, 0.5, 0.2, 0.6]])
    return [g / np.linalg.norm(g) for g in generic]


def braid_invariants(family: SurfaceFamily, s: float, eps: float, n_vertices: int = N_VERTICES,
                     X=None) -> tuple[SphereSlice, BraidInvariants]:
    """Slice plus n, e, lk with the first admissible framing vector."""
    sl = slice_sphere(family, s, eps, n_vertices)
    planes = branch_planes(family)
    cands = [X] if X is not None else framing_vectors(family, planes)
    last = None
    for v in cands:
        try:
            return sl, crossing_number(sl, v, planes=planes)
        except SliceError as exc:
            last = exc
    raise SliceError(f"no admissible framing vector: {last}")


def framing_independence(family: SurfaceFamily, s: float, eps: float, n_vertices: int = N_VERTICES):
    """e for every admissible candidate framing vector."""
    sl = slice_sphere(family, s, eps, n_vertices)
    planes = branch_planes(family)
    out = []
    for v in framing_vectors(family, planes):
        try:
            out.append(crossing_number(sl, v, planes=planes).e)
        except SliceError:
            continue
    return out


# ---------------------------------------------------------------------------
# inequalities


@dataclass
class BennequinReport:
    chi: int | None
    n: int
    e: int | None
    applicable: bool
    slice_bennequin: bool  # chi <= n - e
    linking_bound: bool  # |e| <= -chi + n

    @property
    def holds(self) -> bool:
        return (not self.applicable) or (self.slice_bennequin and self.linking_bound)


def bennequin_check(family: SurfaceFamily, s: float, eps: float, n_vertices: int = N_VERTICES) -> BennequinReport:
    from .diffgeo import gauss_bonnet_euler

    chi = gauss_bonnet_euler(family, s, eps).chi
    sl, inv = braid_invariants(family, s, eps, n_vertices)
    ok = chi is not None and inv.e is not None
    return BennequinReport(chi, inv.n, inv.e, family.has("embedded"),
                           bool(ok and chi <= inv.n - inv.e), bool(ok and abs(inv.e) <= -chi + inv.n))


@dataclass
class NormalLinkingReport:
    muN: int | None
    e: int | None
    sign: int  # muN = sign * e when both nonzero, else 0
    holds: bool


def normal_linking_check(family: SurfaceFamily, muN: int | None, eps: float | None = None,
                n_vertices: int = N_VERTICES) -> NormalLinkingReport:
    """|muN| against |e| of the slice of the limit surface."""
    eps = eps if eps is not None else family.eps_schedule[-1]
    _, inv = braid_invariants(family, 0.0, eps, n_vertices)
    ok = muN is not None and inv.e is not None and abs(muN) == abs(inv.e)
    sign = int(np.sign(muN) * np.sign(inv.e)) if ok and muN and inv.e else 0
    return NormalLinkingReport(muN, inv.e, sign, bool(ok))
