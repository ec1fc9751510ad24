"""Adaptive polar quadrature over ball-cut pieces of chart domains.

A region is the preimage in a chart of ``{eps_lo <= |f - p| <= eps_hi}`` (or
the whole chart domain). Along each ray ``theta`` of the parameter disc the
region is a union of radial segments whose ends are found by bracketing and
bisection; a cell of the adaptive scheme lives in ``(theta, u)`` with
``u in [0, 1]`` mapped onto a segment. Segments starting at the origin are
graded quadratically (``r = b u^2``), the others geometrically.

Implicit charts sum the integrand over every sheet above a base point. The
square-root singularities of the sheets at discriminant points are removed
with a smooth partition of unity: a bump of radius ``rho`` around each
discriminant point is integrated in its own polar coordinates with
``r = t^2``, which is smooth on the double cover.
"""

from __future__ import annotations

import logging
from functools import lru_cache
from dataclasses import dataclass, field

import numpy as np

from .diffgeo import DENSITY_NAMES, densities
from .germ import ExplicitChart, ImplicitChart, Jet2, SurfaceFamily, eval_jet

log = logging.getLogger(__name__)

GAUSS_ORDER = 5
_GX, _GW = np.polynomial.legendre.leggauss(GAUSS_ORDER)
_GX = 0.5 * (_GX + 1)
_GW = 0.5 * _GW


class QuadratureError(RuntimeError):
    pass


class RegionError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureRegion:
    """``kind`` is "ball" (eps_lo <= |f-p| <= eps_hi) or "domain" (whole chart)."""

    kind: str = "ball"
    eps_hi: float = 0.1
    eps_lo: float = 0.0
    max_cells: int = 40000
    rel_tol: float = 1e-4
    abs_tol: float = 1e-6

    @classmethod
    def ball(cls, eps: float, **kw) -> "QuadratureRegion":
        return cls("ball", eps, 0.0, **kw)

    @classmethod
    def domain(cls, **kw) -> "QuadratureRegion":
        return cls("domain", np.inf, 0.0, **kw)


@dataclass
class IntegralResult:
    values: dict[str, float]
    errors: dict[str, float]
    converged: bool = True
    n_cells: int = 0
    notes: list[str] = field(default_factory=list)

    def __getitem__(self, name):
        return self.values[name]


def bump(u: np.ndarray) -> np.ndarray:
    """C-infinity cutoff: 1 for u <= 1/2, 0 for u >= 1."""
    u = np.asarray(u, dtype=float)
    t = np.clip(2 * u - 1, 0, 1)
    a = np.where(t < 1, np.exp(-1 / np.maximum(1 - t, 1e-300)), 0.0)
    b = np.where(t > 0, np.exp(-1 / np.maximum(t, 1e-300)), 0.0)
    return a / (a + b)


# ---------------------------------------------------------------------------
# pointwise evaluation on a chart


class ChartPiece:
    """Evaluation of the distance function and integrands on one chart at fixed s."""

    def __init__(self, chart, s: float, p):
        self.chart = chart
        self.s = s
        self.p = np.asarray(p, dtype=float)
        self.implicit = isinstance(chart, ImplicitChart)
        if self.implicit:
            self.r_in = 0.0
            self.r_out = chart.base_radius
            disc = chart.discriminant_points(s)
            self.disc = disc
            if disc.size and np.min(np.abs(disc)) < 1e-12:
                raise RegionError(f"implicit chart {chart.name!r}: base origin is a discriminant point")
            self.rho = self._bump_radius(disc)
        else:
            self.r_in = chart.r_in
            self.r_out = chart.r_out
            self.disc = np.zeros(0, dtype=complex)
            self.rho = 0.0

    def _bump_radius(self, disc):
        if disc.size == 0:
            return 0.0
        if self.chart.rho_cut is not None:
            return float(self.chart.rho_cut)
        dists = [abs(a) for a in disc]
        dists += [abs(a - b) for i, a in enumerate(disc) for b in disc[i + 1:]]
        return 0.3 * float(min(dists))

    @property
    def lowest_radius(self) -> float:
        if self.r_in > 0:
            return self.r_in
        if not self.implicit and self.chart.is_laurent:
            return 1e-9 * self.r_out
        return 0.0

    def points(self, x: np.ndarray):
        """Sheets over parameter points: (R^4 positions (..., k, 4), aux)."""
        if self.implicit:
            w = self.chart.fiber_roots(x, self.s)
            b = np.broadcast_to(x[..., None], w.shape)
            if self.chart.base == "x":
                pos = np.stack([b.real, b.imag, w.real, w.imag], axis=-1)
            else:
                pos = np.stack([w.real, w.imag, b.real, b.imag], axis=-1)
            return pos, w
        pos = self.chart.position(x, self.s)
        return pos[..., None, :], None

    def dist2(self, x: np.ndarray) -> np.ndarray:
        pos, _ = self.points(x)
        d = pos - self.p
        return np.einsum("...i,...i->...", d, d)

    def jets(self, x: np.ndarray, aux=None) -> Jet2:
        if self.implicit:
            w = aux if aux is not None else self.chart.fiber_roots(x, self.s)
            b = np.broadcast_to(x[..., None], w.shape)
            return self.chart.jets(b, w, self.s)
        return eval_jet(self.chart, x, self.s, check_domain=False).reshape(*np.shape(x), 1)

    def partition_weight(self, x: np.ndarray) -> np.ndarray:
        """Share of the main patch in the partition of unity (1 - sum of bumps)."""
        w = np.ones(np.shape(x))
        for a in self.disc:
            w = w - bump(np.abs(x - a) / self.rho)
        return w


# ---------------------------------------------------------------------------
# radial structure


class RaySegments:
    """Radial segments of a region along rays of a chart, with caching in theta."""

    def __init__(self, piece: ChartPiece, region: QuadratureRegion, n_grid: int = 320):
        self.piece = piece
        self.region = region
        lo = piece.lowest_radius
        hi = piece.r_out
        if lo > 0:
            self.grid = np.geomspace(lo, hi, n_grid)
        else:
            self.grid = np.concatenate([[0.0], np.geomspace(1e-6 * hi, hi, n_grid - 1)])
        self._cache: dict[float, tuple] = {}
        self.n_segments: int | None = None

    def count(self, x: np.ndarray) -> np.ndarray:
        if self.region.kind == "domain":
            return np.full(np.shape(x), self.piece.chart.sheets if self.piece.implicit else 1)
        d2 = self.piece.dist2(x)
        inside = (d2 <= self.region.eps_hi ** 2) & (d2 >= self.region.eps_lo ** 2)
        return inside.sum(axis=-1)

    def breakpoints(self, thetas: np.ndarray):
        """Radii where the number of sheets inside the region changes.

        Returns (breaks (n, k), counts (n, k + 1)): ``counts[:, j]`` is the
        number of sheets inside on the j-th radial interval.
        """
        e = np.exp(1j * thetas)
        r = self.grid
        cnt = self.count(r[None, :] * e[:, None])
        change = cnt[:, 1:] != cnt[:, :-1]
        nchange = change.sum(axis=1)
        if np.any(nchange != nchange[0]):
            raise RegionError("number of region boundary crossings varies with theta; refine the schedule")
        n = len(thetas)
        idx = np.nonzero(change)[1].reshape(n, -1)
        a, b = r[idx], r[idx + 1]
        ca = np.take_along_axis(cnt, idx, axis=1)
        ee = e[:, None]
        for _ in range(60):
            m = 0.5 * (a + b)
            same = self.count(m * ee) == ca
            a = np.where(same, m, a)
            b = np.where(same, b, m)
        counts = np.concatenate([cnt[:, :1], np.take_along_axis(cnt, idx + 1, axis=1)], axis=1)
        return 0.5 * (a + b), counts

    def _solve(self, thetas: np.ndarray):
        if self.region.kind == "domain":
            lo = np.full(thetas.shape, self.piece.lowest_radius)
            hi = np.full(thetas.shape, self.piece.r_out)
            return [(lo, hi)]
        breaks, counts = self.breakpoints(thetas)
        n = len(thetas)
        ends = np.concatenate([np.full((n, 1), self.grid[0]), breaks, np.full((n, 1), self.grid[-1])], axis=1)
        segs = []
        for k in range(ends.shape[1] - 1):
            c = counts[:, k]
            if np.all(c == 0):
                continue
            if np.any(c == 0):
                raise RegionError("region structure varies with theta")
            if k == ends.shape[1] - 2:
                raise RegionError(
                    f"region reaches the chart boundary r = {self.piece.r_out} (eps too large for this chart)"
                )
            segs.append((ends[:, k], ends[:, k + 1]))
        return segs

    def segments(self, thetas: np.ndarray):
        thetas = np.asarray(thetas, dtype=float)
        missing = np.array([t for t in np.unique(thetas) if float(t) not in self._cache])
        if missing.size:
            segs = self._solve(missing)
            if self.n_segments is None:
                self.n_segments = len(segs)
            elif len(segs) != self.n_segments:
                raise RegionError("number of region segments varies with theta")
            for i, t in enumerate(missing):
                self._cache[float(t)] = tuple((lo[i], hi[i]) for lo, hi in segs)
        out = np.array([self._cache[float(t)] for t in thetas.ravel()])
        return out.reshape(thetas.shape + (self.n_segments, 2))


# ---------------------------------------------------------------------------
# adaptive cubature


def _cell_nodes(cells: np.ndarray):
    """Tensor Gauss nodes of cells (n, 4) = (t0, t1, u0, u1): returns theta, u, w (n, G*G)."""
    t0, t1, u0, u1 = cells.T
    th = t0[:, None] + (t1 - t0)[:, None] * _GX[None, :]
    uu = u0[:, None] + (u1 - u0)[:, None] * _GX[None, :]
    wt = (t1 - t0)[:, None] * _GW[None, :]
    wu = (u1 - u0)[:, None] * _GW[None, :]
    theta = np.repeat(th, GAUSS_ORDER, axis=1)
    u = np.tile(uu, (1, GAUSS_ORDER))
    w = np.repeat(wt, GAUSS_ORDER, axis=1) * np.tile(wu, (1, GAUSS_ORDER))
    return theta, u, w


def _split(cells: np.ndarray) -> np.ndarray:
    t0, t1, u0, u1 = cells.T
    tm, um = 0.5 * (t0 + t1), 0.5 * (u0 + u1)
    kids = [
        np.stack([t0, tm, u0, um], 1), np.stack([tm, t1, u0, um], 1),
        np.stack([t0, tm, um, u1], 1), np.stack([tm, t1, um, u1], 1),
    ]
    return np.stack(kids, axis=1).reshape(-1, 4)


class Patch:
    """A polar patch: maps cell nodes to weighted integrand samples."""

    def __init__(self, evaluate, names):
        self.evaluate = evaluate
        self.names = names

    def cell_values(self, cells: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Integrals over cells of every density and of its absolute value: (n, k) each."""
        theta, u, w = _cell_nodes(cells)
        vals = self.evaluate(theta.ravel(), u.ravel())  # (m, k)
        vals = vals.reshape(theta.shape + (len(self.names),))
        s = np.einsum("ng,ngk->nk", w, vals)
        a = np.einsum("ng,ngk->nk", w, np.abs(vals))
        return s, a


def adaptive_integrate(patch: Patch, drive: list[int], rel_tol: float, abs_tol: float,
                       max_cells: int, n_theta0: int = 16, n_u0: int = 4):
    tb = np.linspace(0, 2 * np.pi, n_theta0 + 1)
    ub = np.linspace(0, 1, n_u0 + 1)
    cells = np.array([[tb[i], tb[i + 1], ub[j], ub[j + 1]] for i in range(n_theta0) for j in range(n_u0)])
    coarse, _ = patch.cell_values(cells)
    kids = _split(cells)
    fine, absfine = patch.cell_values(kids)
    nk = len(patch.names)
    fine = fine.reshape(len(cells), 4, nk)
    absfine = absfine.reshape(len(cells), 4, nk)
    converged = False
    while True:
        refined = fine.sum(axis=1)
        err = np.abs(coarse - refined)
        total = refined.sum(axis=0)
        total_abs = absfine.sum(axis=(0, 1))
        scale = np.maximum(abs_tol, rel_tol * total_abs)
        cell_score = (err[:, drive] / scale[drive]).max(axis=1)
        total_err = err.sum(axis=0)
        if np.all(total_err[drive] <= scale[drive]):
            converged = True
            break
        if len(cells) * 4 > max_cells:
            log.warning("quadrature budget of %d cells exhausted", max_cells)
            break
        order = np.argsort(-cell_score, kind="stable")
        cum = np.cumsum(cell_score[order])
        n_ref = int(np.searchsorted(cum, 0.5 * cum[-1]) + 1)
        pick = np.sort(order[:n_ref])
        keep = np.setdiff1d(np.arange(len(cells)), pick)
        new_cells = _split(cells[pick])
        new_coarse = fine[pick].reshape(-1, nk)
        grand = _split(new_cells)
        gf, ga = patch.cell_values(grand)
        cells = np.concatenate([cells[keep], new_cells])
        coarse = np.concatenate([coarse[keep], new_coarse])
        fine = np.concatenate([fine[keep], gf.reshape(-1, 4, nk)])
        absfine = np.concatenate([absfine[keep], ga.reshape(-1, 4, nk)])
    return refined.sum(axis=0), err.sum(axis=0), converged, len(cells)


# ---------------------------------------------------------------------------
# region integrals


def _main_patch(piece: ChartPiece, rays: RaySegments, seg_index: int, names):
    idx = [DENSITY_NAMES.index(n) for n in names]

    def evaluate(theta, u):
        segs = rays.segments(theta)[:, seg_index, :]
        a, b = segs[:, 0], segs[:, 1]
        from_origin = a <= 0
        ratio = np.where(from_origin, 1.0, b / np.where(from_origin, 1.0, a))
        r = np.where(from_origin, b * u * u, a * ratio ** u)
        drdu = np.where(from_origin, 2 * b * u, r * np.log(ratio))
        x = r * np.exp(1j * theta)
        out = _sheet_sum(piece, rays, x, idx)
        weight = r * drdu * piece.chart.multiplicity
        if piece.implicit and piece.disc.size:
            weight = weight * piece.partition_weight(x)
        return out * weight[:, None]

    return Patch(evaluate, names)


def _sheet_sum(piece: ChartPiece, rays: RaySegments, x, idx, restrict=True):
    pos, aux = piece.points(x)
    jet = piece.jets(x, aux)
    dens = densities(jet)
    vals = np.stack([dens[DENSITY_NAMES[i]] for i in idx], axis=-1)  # (n, k_sheets, m)
    if restrict and rays.region.kind == "ball":
        d = pos - piece.p
        d2 = np.einsum("...i,...i->...", d, d)
        inside = (d2 <= rays.region.eps_hi ** 2) & (d2 >= rays.region.eps_lo ** 2)
        vals = np.where(inside[..., None], vals, 0.0)
    return vals.sum(axis=-2)


def _bump_patch(piece: ChartPiece, rays: RaySegments, a: complex, names):
    idx = [DENSITY_NAMES.index(n) for n in names]
    tmax = np.sqrt(piece.rho)

    def evaluate(theta, u):
        t = tmax * u
        r = t * t
        x = a + r * np.exp(1j * theta)
        out = _sheet_sum(piece, rays, x, idx)
        weight = 2 * t ** 3 * tmax * bump(r / piece.rho) * piece.chart.multiplicity
        return out * weight[:, None]

    return Patch(evaluate, names)


def _check_bumps(piece: ChartPiece, rays: RaySegments):
    if not piece.implicit or piece.disc.size == 0 or rays.region.kind != "ball":
        return
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    for a in piece.disc:
        ring = a + piece.rho * np.outer([0.0, 0.5, 1.0], np.exp(1j * th)).ravel()
        cnt = rays.count(np.concatenate([[a], ring]))
        if np.any(cnt != cnt[0]):
            raise RegionError(
                f"discriminant disc around {a:.4g} (radius {piece.rho:.3g}) meets the region boundary"
            )


def integrate_chart(chart, s: float, p, region: QuadratureRegion, names=DENSITY_NAMES,
                    drive=None) -> IntegralResult:
    names = list(names)
    drive_names = list(drive) if drive is not None else names
    drive_idx = [names.index(n) for n in drive_names]
    piece = ChartPiece(chart, s, p)
    rays = RaySegments(piece, region)
    rays.segments(np.linspace(0, 2 * np.pi, 8, endpoint=False))
    _check_bumps(piece, rays)
    total = np.zeros(len(names))
    err = np.zeros(len(names))
    ok = True
    ncells = 0
    patches = [_main_patch(piece, rays, k, names) for k in range(rays.n_segments or 0)]
    patches += [_bump_patch(piece, rays, a, names) for a in piece.disc]
    for patch in patches:
        v, e, c, n = adaptive_integrate(patch, drive_idx, region.rel_tol, region.abs_tol, region.max_cells)
        total += v
        err += e
        ok &= c
        ncells += n
    return IntegralResult(dict(zip(names, map(float, total))), dict(zip(names, map(float, err))), ok, ncells)


def integrate_family(family: SurfaceFamily, s: float, region: QuadratureRegion, names=DENSITY_NAMES,
                     drive=None) -> IntegralResult:
    """Sum over the charts of the family at s (limit charts at s = 0)."""
    names = list(names)
    out = IntegralResult({n: 0.0 for n in names}, {n: 0.0 for n in names})
    for chart in family.charts_at(s):
        res = integrate_chart(chart, s, family.p, region, names, drive)
        for n in names:
            out.values[n] += res.values[n]
            out.errors[n] += res.errors[n]
        out.converged &= res.converged
        out.n_cells += res.n_cells
    return out


# ---------------------------------------------------------------------------
# boundary curves {|f - p| = eps}


@dataclass
class BoundaryTrace:
    """Points of one chart's boundary curve(s) at angular nodes ``theta``.

    Arrays have shape (M, n) with n boundary points per ray; the assignment of
    columns to strands is not guaranteed to be continuous in theta (sheets of
    implicit charts may exchange), see :mod:`milnorlab.braid`.
    """

    chart_name: str
    theta: np.ndarray
    radius: np.ndarray
    base: np.ndarray
    pos: np.ndarray
    jet: Jet2
    sign: np.ndarray
    multiplicity: int = 1


def trace_boundary(chart, s: float, p, eps: float, n_theta: int = 720,
                   transversality_tol: float = 1e-6) -> BoundaryTrace:
    """Boundary points of the ball-cut region of ``chart`` at n_theta equispaced angles."""
    piece = ChartPiece(chart, s, p)
    rays = RaySegments(piece, QuadratureRegion.ball(eps))
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    breaks, counts = rays.breakpoints(theta)
    jumps = np.abs(np.diff(counts, axis=1))
    if np.any(jumps != jumps[:1]):
        raise RegionError("sheet structure of the boundary varies with theta")
    if breaks.size and np.any(breaks[:, -1] >= rays.grid[-1] * (1 - 1e-9)):
        raise RegionError(f"boundary reaches the chart boundary r = {piece.r_out}")
    e = np.exp(1j * theta)
    rad, base, pos, jets = [], [], [], []
    for k in range(breaks.shape[1]):
        x = breaks[:, k] * e
        P, aux = piece.points(x)
        d2 = np.einsum("...i,...i->...", P - piece.p, P - piece.p)
        order = np.argsort(np.abs(d2 - eps * eps), axis=1, kind="stable")[:, : jumps[0, k]]
        J = piece.jets(x, aux)
        for j in range(jumps[0, k]):
            sel = order[:, j]
            rows = np.arange(n_theta)
            rad.append(breaks[:, k])
            base.append(x)
            pos.append(P[rows, sel])
            jets.append(J[rows, sel])
    if not jets:
        raise RegionError(f"chart {chart.name!r}: ball of radius {eps} does not meet the surface boundary")
    jet = Jet2(*[np.stack([getattr(j, n) for j in jets], axis=1) for n in ("f", "fx", "fy", "fxx", "fxy", "fyy")])
    radius = np.stack(rad, axis=1)
    from .diffgeo import level_set_boundary

    frame, sff, d, tau, speed, sign = level_set_boundary(jet, piece.p, theta[:, None], radius)
    tang = np.sqrt(np.einsum("...i,...i->...", d, frame.e1) ** 2 + np.einsum("...i,...i->...", d, frame.e2) ** 2)
    if np.min(tang) < transversality_tol * eps:
        raise RegionError(f"sphere of radius {eps} is not transverse to the surface")
    return BoundaryTrace(chart.name, theta, radius, np.stack(base, axis=1), np.stack(pos, axis=1), jet, sign,
                         chart.multiplicity)


def _boundary_density(trace: BoundaryTrace, p, form: str, X=None):
    from .diffgeo import geodesic_curvature, level_set_boundary, normal_connection_form

    frame, sff, d, tau, speed, sign = level_set_boundary(trace.jet, p, trace.theta[:, None], trace.radius)
    if form == "k_g":
        return geodesic_curvature(frame, sff, d, tau) * speed, None
    if form == "omegaN":
        om, nrm = normal_connection_form(frame, sff, tau, X)
        return sign * om * speed, nrm
    raise ValueError(f"unknown boundary form {form!r}")


def boundary_integral_chart(chart, s: float, p, eps: float, form: str, X=None, tol: float = 1e-10,
                            n0: int = 64, n_max: int = 8192) -> tuple[float, float, float]:
    """Periodic trapezoid rule in theta, doubled until converged.

    Returns (value, error estimate, min |X^N| / |X| on the boundary or nan).
    """
    prev = None
    n = n0
    while True:
        trace = trace_boundary(chart, s, p, eps, n)
        dens, nrm = _boundary_density(trace, p, form, X)
        val = float(dens.sum() * 2 * np.pi / n) * chart.multiplicity
        if prev is not None and (abs(val - prev) <= tol * max(1.0, abs(val)) or 2 * n > n_max):
            xmin = float(np.min(nrm) / np.linalg.norm(X)) if nrm is not None else float("nan")
            return val, abs(val - prev), xmin
        prev = val
        n *= 2


def boundary_integral(family: SurfaceFamily, s: float, eps: float, form: str, X=None, **kw):
    """Line integral of k_g or of omega^N(X) over the boundary of Sigma_s^eps."""
    tot, err, xmin = 0.0, 0.0, np.inf
    for chart in family.charts_at(s):
        v, e, m = boundary_integral_chart(chart, s, family.p, eps, form, X, **kw)
        tot += v
        err += e
        if not np.isnan(m):
            xmin = min(xmin, m)
    return tot, err, xmin


# ---------------------------------------------------------------------------
# cached entry point used by the analyses


BASE_DRIVE = ("OmegaT", "OmegaN", "Jpull", "Kpull")
MINIMAL_DRIVE = ("normB2", "B12wB11")


def drive_names(family: SurfaceFamily) -> tuple[str, ...]:
    """Integrands whose accuracy steers refinement for this family."""
    if family.has("minimal") or family.has("holomorphic"):
        return BASE_DRIVE + MINIMAL_DRIVE
    return BASE_DRIVE


@lru_cache(maxsize=512)
def region_integrals(family: SurfaceFamily, s: float, eps: float, rel_tol: float = 1e-4,
                     abs_tol: float = 1e-6) -> IntegralResult:
    """All densities integrated over Sigma_s^eps (s = 0 gives the limit surface)."""
    region = QuadratureRegion.ball(eps, rel_tol=rel_tol, abs_tol=abs_tol)
    return integrate_family(family, s, region, DENSITY_NAMES, drive=drive_names(family))
