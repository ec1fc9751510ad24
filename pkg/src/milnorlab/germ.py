"""Surface germs: explicit and implicit charts, exact 2-jets, branch data.

Orientation convention used throughout the package: C^2 = R^4 through
``(c1, c2) -> (re c1, im c1, re c2, im c2)`` and the standard basis of R^4
is positive. Chart parameters ``z = x + i y`` carry the standard orientation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expr import (
    EXPLICIT_VARS, IMPLICIT_VARS, Expr, ImagUnit, Im, Num, Poly, Re, diff, expand,
)

_DX = {"z": Num(1), "zb": Num(1)}
_DY = {"z": ImagUnit(), "zb": -ImagUnit()}

ROLES = ("both", "family", "limit")
FLAGS = ("holomorphic", "minimal", "embedded", "in_r3")


class ChartError(ValueError):
    pass


class BranchError(ValueError):
    pass


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class Jet2:
    """Value and partial derivatives up to order two; arrays of shape (..., 4)."""

    f: np.ndarray
    fx: np.ndarray
    fy: np.ndarray
    fxx: np.ndarray
    fxy: np.ndarray
    fyy: np.ndarray

    def __getitem__(self, idx) -> "Jet2":
        return Jet2(*(a[idx] for a in (self.f, self.fx, self.fy, self.fxx, self.fxy, self.fyy)))

    @property
    def shape(self):
        return self.f.shape[:-1]

    def reshape(self, *shape) -> "Jet2":
        return Jet2(*(a.reshape(*shape, 4) for a in (self.f, self.fx, self.fy, self.fxx, self.fxy, self.fyy)))


def complex_pair_to_r4(c1, c2) -> np.ndarray:
    c1 = np.asarray(c1)
    c2 = np.asarray(c2)
    return np.stack([c1.real, c1.imag, c2.real, c2.imag], axis=-1)


@dataclass(frozen=True)
class Branch:
    N: int
    s: int = 1

    @property
    def m(self) -> int:
        return self.N - 1


@dataclass(frozen=True)
class BranchData:
    branches: tuple[Branch, ...]
    p: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    @property
    def strand_total(self) -> int:
        return sum(b.s * (b.m + 1) for b in self.branches)


# ---------------------------------------------------------------------------
# explicit charts


@dataclass(frozen=True)
class ExplicitChart:
    name: str
    coords: tuple[Expr, Expr, Expr, Expr]
    r_in: float = 0.0
    r_out: float = 1.0
    multiplicity: int = 1
    role: str = "both"
    complex_form: tuple[Expr, Expr] | None = None
    _polys: tuple = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.multiplicity < 1:
            raise ChartError(f"chart {self.name!r}: multiplicity must be >= 1")
        if not (0 <= self.r_in < self.r_out):
            raise ChartError(f"chart {self.name!r}: bad annulus ({self.r_in}, {self.r_out})")
        if self.role not in ROLES:
            raise ChartError(f"chart {self.name!r}: role must be one of {ROLES}")
        polys = []
        for e in self.coords:
            ex, ey = diff(e, _DX), diff(e, _DY)
            derivs = (e, ex, ey, diff(ex, _DX), diff(ex, _DY), diff(ey, _DY))
            polys.append(tuple(expand(d, EXPLICIT_VARS) for d in derivs))
        object.__setattr__(self, "_polys", tuple(polys))

    @classmethod
    def from_complex(cls, name, c1: Expr, c2: Expr, **kw) -> "ExplicitChart":
        return cls(name, (Re(c1), Im(c1), Re(c2), Im(c2)), complex_form=(c1, c2), **kw)

    @property
    def is_laurent(self) -> bool:
        return any(k[0] < 0 or k[1] < 0 for p in self._polys for k in p[0].terms)

    def coordinate_poly(self, k: int, order: int = 0) -> Poly:
        return self._polys[k][order]

    def in_domain(self, z) -> np.ndarray:
        r = np.abs(z)
        return (r >= self.r_in * (1 - 1e-12)) & (r <= self.r_out * (1 + 1e-12))

    def position(self, z, s: float) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        zb = np.conj(z)
        return np.stack([self._polys[k][0](z=z, zb=zb, s=s).real for k in range(4)], axis=-1)


def eval_jet(chart: ExplicitChart, z, s: float, check_domain: bool = True) -> Jet2:
    """Exact 2-jet of an explicit chart at parameter(s) ``z``."""
    z = np.asarray(z, dtype=complex)
    if check_domain and not np.all(chart.in_domain(z)):
        raise ChartError(f"chart {chart.name!r}: point outside annulus [{chart.r_in}, {chart.r_out}]")
    zb = np.conj(z)
    parts = [[p(z=z, zb=zb, s=s).real for p in chart._polys[k]] for k in range(4)]
    arrays = [np.stack([parts[k][j] for k in range(4)], axis=-1) for j in range(6)]
    return Jet2(*arrays)


# ---------------------------------------------------------------------------
# implicit charts


@dataclass(frozen=True)
class ImplicitChart:
    """Plane curve {P(x, y, s) = 0} in C^2, parametrised by the ``base`` variable."""

    name: str
    P: Expr
    base: str = "x"
    sheets: int = 2
    base_radius: float = 1.0
    rho_cut: float | None = None
    multiplicity: int = 1
    role: str = "family"
    _poly: Poly = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.base not in ("x", "y"):
            raise ChartError(f"implicit chart {self.name!r}: base must be x or y")
        if self.role not in ROLES:
            raise ChartError(f"implicit chart {self.name!r}: role must be one of {ROLES}")
        poly = expand(self.P, IMPLICIT_VARS)
        if any(min(k) < 0 for k in poly.terms):
            raise ChartError(f"implicit chart {self.name!r}: P must be a polynomial")
        deg = poly.degree_in(self.fiber)
        if deg != self.sheets:
            raise ChartError(
                f"implicit chart {self.name!r}: declared {self.sheets} sheets but P has degree {deg} in {self.fiber}"
            )
        object.__setattr__(self, "_poly", poly)

    @property
    def fiber(self) -> str:
        return "y" if self.base == "x" else "x"

    def _eval(self, poly: Poly, b, w, s):
        return poly(**{self.base: b, self.fiber: w, "s": s})

    def fiber_coefficients(self, b, s: float) -> np.ndarray:
        """Coefficients (highest degree first) of P as a polynomial in the fiber variable."""
        b = np.asarray(b, dtype=complex)
        i_f = self._poly.vars.index(self.fiber)
        d = self.sheets
        coeffs = np.zeros(b.shape + (d + 1,), dtype=complex)
        for j in range(d + 1):
            sub = Poly(self._poly.vars, {k: c for k, c in self._poly.terms.items() if k[i_f] == j})
            sub = Poly(sub.vars, {k[:i_f] + (0,) + k[i_f + 1:]: c for k, c in sub.terms.items()})
            if sub.terms:
                coeffs[..., d - j] = self._eval(sub, b, 0.0, s)
        return coeffs

    def fiber_roots(self, b, s: float) -> np.ndarray:
        """All fiber values over base points ``b``; shape b.shape + (sheets,)."""
        b = np.asarray(b, dtype=complex)
        c = self.fiber_coefficients(b, s)
        lead = c[..., 0]
        if np.any(np.abs(lead) < 1e-300):
            raise ChartError(f"implicit chart {self.name!r}: leading coefficient vanishes")
        d = self.sheets
        if d == 1:
            roots = (-c[..., 1] / lead)[..., None]
        elif d == 2:
            a0, a1, a2 = c[..., 0], c[..., 1], c[..., 2]
            disc = np.sqrt(a1 * a1 - 4 * a0 * a2)
            q = -0.5 * (a1 + np.where((np.conj(a1) * disc).real >= 0, disc, -disc))
            q = np.where(q == 0, 1e-300, q)
            r1 = q / a0
            r2 = np.where(np.abs(q) > 1e-300, a2 / q, 0)
            roots = np.stack([r1, r2], axis=-1)
        else:
            comp = np.zeros(b.shape + (d, d), dtype=complex)
            comp[..., 0, :] = -c[..., 1:] / lead[..., None]
            comp[..., np.arange(1, d), np.arange(d - 1)] = 1
            roots = np.linalg.eigvals(comp)
        P = self._poly
        Pw = P.deriv(self.fiber)
        bb = b[..., None]
        for _ in range(2):
            num = self._eval(P, bb, roots, s)
            den = self._eval(Pw, bb, roots, s)
            step = np.where(np.abs(den) > 1e-300, num / np.where(den == 0, 1, den), 0)
            roots = roots - step
        order = np.lexsort((-roots.imag, -roots.real), axis=-1)
        return np.take_along_axis(roots, order, axis=-1)

    def residual(self, b, w, s: float) -> np.ndarray:
        return self._eval(self._poly, b, w, s)

    def discriminant_points(self, s: float) -> np.ndarray:
        """Base values where two sheets meet (common roots of P and dP/dfiber)."""
        import sympy as sp

        bsym, wsym = sp.symbols("b w")
        syms = {self.base: bsym, self.fiber: wsym, "s": sp.nsimplify(s, rational=True)}
        expr = 0
        for k, c in self._poly.terms.items():
            term = sp.nsimplify(c.real, rational=True) + sp.I * sp.nsimplify(c.imag, rational=True)
            for v, p in zip(self._poly.vars, k):
                term *= syms[v] ** p
            expr += term
        res = sp.resultant(expr, sp.diff(expr, wsym), wsym)
        poly = sp.Poly(sp.expand(res), bsym)
        if poly.degree() <= 0:
            return np.zeros(0, dtype=complex)
        coeffs = np.array([complex(c) for c in poly.all_coeffs()])
        roots = np.roots(coeffs)
        return roots[np.abs(roots) <= self.base_radius]

    def jets(self, b, w, s: float) -> Jet2:
        """Exact jets of the sheet through (b, w), base coordinate b = u + i v."""
        b = np.asarray(b, dtype=complex)
        w = np.asarray(w, dtype=complex)
        P = self._poly
        f, g = self.base, self.fiber
        Pb = self._eval(P.deriv(f), b, w, s)
        Pw = self._eval(P.deriv(g), b, w, s)
        Pbb = self._eval(P.deriv(f).deriv(f), b, w, s)
        Pbw = self._eval(P.deriv(f).deriv(g), b, w, s)
        Pww = self._eval(P.deriv(g).deriv(g), b, w, s)
        w1 = -Pb / Pw
        w2 = -(Pbb + 2 * Pbw * w1 + Pww * w1 * w1) / Pw
        one = np.ones_like(b)
        zero = np.zeros_like(b)
        if self.base == "x":
            F, F1, F2 = (b, w), (one, w1), (zero, w2)
        else:
            F, F1, F2 = (w, b), (w1, one), (w2, zero)
        r4 = complex_pair_to_r4
        return Jet2(
            r4(*F), r4(*F1), r4(1j * F1[0], 1j * F1[1]),
            r4(*F2), r4(1j * F2[0], 1j * F2[1]), r4(-F2[0], -F2[1]),
        )


Chart = ExplicitChart | ImplicitChart


# ---------------------------------------------------------------------------
# branch data


def branch_data(chart: ExplicitChart, tolerance: float = 10.0, probe_radius: float = 1e-3) -> BranchData:
    """Winding order of the leading homogeneous term of the chart at s = 0, z = 0.

    Only the normal form up to a linear change of coordinates of R^4 is
    recognised: the leading part must be ``Re(v z^N)`` with Re v, Im v
    independent, dominating the remainder by ``tolerance`` at ``probe_radius``.
    """
    polys = [chart.coordinate_poly(k).substitute("s", 0.0) for k in range(4)]
    p = []
    rest = []
    for poly in polys:
        terms = {k: c for k, c in poly.terms.items() if abs(c) > 1e-14}
        const = terms.pop((0, 0, 0), 0.0)
        if any(k[0] < 0 or k[1] < 0 for k in terms):
            raise BranchError(f"chart {chart.name!r}: Laurent terms at s = 0, no branched disc at z = 0")
        p.append(const.real)
        rest.append(terms)
    degrees = [k[0] + k[1] for terms in rest for k in terms]
    if not degrees:
        raise BranchError(f"chart {chart.name!r}: constant map at s = 0")
    N = min(degrees)
    v = np.zeros(4, dtype=complex)
    for i, terms in enumerate(rest):
        for k, c in terms.items():
            if k[0] + k[1] != N:
                continue
            if k == (N, 0, 0):
                v[i] += c
            elif k != (0, N, 0):
                raise BranchError(
                    f"chart {chart.name!r}: leading term of degree {N} is not of the form Re(v z^{N})"
                )
    A = np.stack([v.real, -v.imag], axis=1)
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[1] <= 1e-12 * max(sv[0], 1e-300):
        raise BranchError(f"chart {chart.name!r}: leading term does not span a 2-plane")
    theta = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    z = probe_radius * np.exp(1j * theta)
    lead = 2 * (v[None, :] * z[:, None] ** N).real
    full = chart.position(z, 0.0) - np.array(p)
    remainder = np.max(np.linalg.norm(full - lead, axis=1))
    leading = np.min(np.linalg.norm(lead, axis=1))
    if remainder > 0 and leading / remainder < tolerance * (1 - 1e-6):
        raise BranchError(
            f"chart {chart.name!r}: leading term dominates the remainder only by {leading / remainder:.3g}"
        )
    return BranchData((Branch(N, chart.multiplicity),), tuple(p))


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class SurfaceFamily:
    name: str
    charts: tuple[Chart, ...]
    branches: tuple[Branch, ...]
    p: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    s_schedule: tuple[float, ...] = (1e-2, 2.5e-3, 6.25e-4)
    eps_schedule: tuple[float, ...] = (0.2, 0.1, 0.05)
    flags: frozenset[str] = frozenset()

    def family_charts(self) -> tuple[Chart, ...]:
        return tuple(c for c in self.charts if c.role in ("both", "family"))

    def limit_charts(self) -> tuple[ExplicitChart, ...]:
        out = tuple(c for c in self.charts if c.role in ("both", "limit"))
        for c in out:
            if not isinstance(c, ExplicitChart):
                raise ValidationError(f"family {self.name!r}: limit chart {c.name!r} must be explicit")
        return out

    def charts_at(self, s: float) -> tuple[Chart, ...]:
        return self.limit_charts() if s == 0 else self.family_charts()

    def has(self, flag: str) -> bool:
        return flag in self.flags

    @property
    def branch_data(self) -> BranchData:
        return BranchData(self.branches, self.p)


def check_rank(chart: ExplicitChart, s: float, n_r: int = 24, n_theta: int = 48, tol: float = 1e-10) -> float:
    """Smallest ratio sigma_2/sigma_1 of the differential over a polar sample grid."""
    lo = max(chart.r_in, 1e-3 * chart.r_out)
    r = np.linspace(lo, chart.r_out, n_r + 2)[1:-1]
    th = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    z = (r[:, None] * np.exp(1j * th[None, :])).ravel()
    jet = eval_jet(chart, z, s)
    D = np.stack([jet.fx, jet.fy], axis=-1)
    sv = np.linalg.svd(D, compute_uv=False)
    return float(np.min(sv[:, 1] / np.maximum(sv[:, 0], 1e-300)))


def validate_family(family: SurfaceFamily, rank_tol: float = 1e-8) -> None:
    """Rank-2 sampling on every scheduled s and branch-data agreement on the limit charts."""
    if not family.family_charts():
        raise ValidationError(f"family {family.name!r}: no charts for s > 0")
    if list(family.s_schedule) != sorted(family.s_schedule, reverse=True) or min(family.s_schedule) <= 0:
        raise ValidationError("s_schedule must be positive and strictly decreasing")
    if list(family.eps_schedule) != sorted(family.eps_schedule, reverse=True) or min(family.eps_schedule) <= 0:
        raise ValidationError("eps_schedule must be positive and strictly decreasing")
    for chart in family.family_charts():
        if isinstance(chart, ExplicitChart):
            for s in family.s_schedule:
                ratio = check_rank(chart, s)
                if ratio < rank_tol:
                    raise ValidationError(
                        f"family {family.name!r}: chart {chart.name!r} is not rank 2 at s = {s} (ratio {ratio:.2e})"
                    )
    found = []
    for chart in family.limit_charts():
        bd = branch_data(chart)
        if not np.allclose(bd.p, family.p, atol=1e-12):
            raise ValidationError(f"family {family.name!r}: chart {chart.name!r} does not pass through p")
        found.extend(bd.branches)
    if sorted((b.N, b.s) for b in found) != sorted((b.N, b.s) for b in family.branches):
        raise ValidationError(
            f"family {family.name!r}: declared branches {family.branches} but limit charts give {tuple(found)}"
        )


def sample_points(chart: ExplicitChart, n: int, rng: np.random.Generator, r_max: float | None = None,
                  r_min: float = 0.0) -> np.ndarray:
    r_hi = chart.r_out if r_max is None else min(r_max, chart.r_out)
    r_lo = max(chart.r_in, r_min)
    r = np.sqrt(rng.uniform(r_lo ** 2, r_hi ** 2, n))
    return r * np.exp(1j * rng.uniform(0, 2 * np.pi, n))


def jets_at(chart: Chart, points: Sequence[complex] | np.ndarray, s: float) -> Jet2:
    """Jets at parameter points; implicit charts return every sheet (shape n x sheets)."""
    if isinstance(chart, ExplicitChart):
        return eval_jet(chart, np.asarray(points), s)
    b = np.asarray(points, dtype=complex)
    w = chart.fiber_roots(b, s)
    return chart.jets(np.broadcast_to(b[..., None], w.shape), w, s)


def implicit_sheet_jet(chart: ImplicitChart, base: complex, sheet: int, s: float) -> Jet2:
    """Jet of one sheet over ``base``; sheets are ordered by the root solver, deterministically."""
    if abs(base) > chart.base_radius:
        raise ChartError(f"base point {base} outside disc({chart.base_radius})")
    disc = chart.discriminant_points(s)
    rho = chart.rho_cut if chart.rho_cut is not None else 0.0
    if disc.size and np.min(np.abs(disc - base)) < max(rho, 1e-9):
        raise ChartError(f"base point {base} within {rho} of a discriminant point")
    roots = chart.fiber_roots(np.array([base]), s)[0]
    if not 0 <= sheet < chart.sheets:
        raise ChartError(f"sheet index {sheet} out of range")
    return chart.jets(np.array(base), np.array(roots[sheet]), s)
