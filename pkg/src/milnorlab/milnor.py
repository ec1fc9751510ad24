"""Tangent and normal Milnor numbers from the (eps, s) double limit.

For every pair of the schedule we integrate the curvature forms over
``Sigma_s^eps`` and over the limit surface ``Sigma_0^eps`` and record

    l(eps, s) = -(1/2pi) [ int_{Sigma_s^eps} Omega - int_{Sigma_0^eps} Omega ].

At fixed eps the entries must stabilise in s; the stabilised values are then
extrapolated to eps -> 0 and snapped to the nearest integer.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diffgeo import adapted_frame, second_fundamental_form
from .germ import ImplicitChart, SurfaceFamily, jets_at
from .quadrature import IntegralResult, region_integrals

TWO_PI = 2 * np.pi


class MilnorError(RuntimeError):
    pass


class MinimalityError(MilnorError):
    pass


def worker_count() -> int:
    """Number of workers, capped by the MILNORLAB_THREADS environment variable."""
    cap = os.environ.get("MILNORLAB_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise MilnorError(f"MILNORLAB_THREADS must be an integer, got {cap!r}") from None
    return n


@dataclass(frozen=True)
class LimitSchedule:
    """eps values (decreasing) and, for each eps, decreasing s values."""

    eps: tuple[float, ...]
    s: tuple[tuple[float, ...], ...]
    theta_s: float = 0.02
    order: int = 1
    rel_tol: float = 1e-4
    abs_tol: float = 1e-6
    snap: float = 0.1

    def __post_init__(self):
        if len(self.eps) == 0 or any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise ValueError(f"eps schedule must be strictly decreasing and non-empty: {self.eps}")
        if len(self.s) != len(self.eps):
            raise ValueError("need one s list per eps value")
        for row in self.s:
            if len(row) == 0 or any(b >= a for a, b in zip(row, row[1:])) or min(row) <= 0:
                raise ValueError(f"s schedule must be positive and strictly decreasing: {row}")
        if self.theta_s <= 0:
            raise ValueError("stabilisation threshold must be positive")
        if not 0 <= self.order:
            raise ValueError("extrapolation order must be >= 0")

    @classmethod
    def for_family(cls, family: SurfaceFamily, eps=None, s=None, **kw) -> "LimitSchedule":
        eps = tuple(eps) if eps is not None else tuple(family.eps_schedule)
        s = tuple(s) if s is not None else tuple(family.s_schedule)
        return cls(eps, tuple(s for _ in eps), **kw)

    def pairs(self):
        return [(e, s) for e, row in zip(self.eps, self.s) for s in row]


@dataclass
class TableEntry:
    """One (eps, s) entry of the limit table."""

    eps: float
    s: float
    family: IntegralResult
    limit: IntegralResult

    def diff(self, name: str) -> float:
        return self.family.values[name] - self.limit.values[name]

    def err(self, name: str) -> float:
        return self.family.errors[name] + self.limit.errors[name]

    @property
    def lT(self) -> float:
        return -self.diff("OmegaT") / TWO_PI

    @property
    def lN(self) -> float:
        return -self.diff("OmegaN") / TWO_PI

    @property
    def lT_err(self) -> float:
        return self.err("OmegaT") / TWO_PI

    @property
    def lN_err(self) -> float:
        return self.err("OmegaN") / TWO_PI

    @property
    def converged(self) -> bool:
        return self.family.converged and self.limit.converged


def snap_integer(x: float, threshold: float = 0.1) -> int | None:
    k = int(np.rint(x))
    return k if abs(x - k) < threshold else None


def richardson(eps, values, order: int) -> float:
    """Value at eps = 0 of the polynomial of degree ``order`` through the last order+1 points."""
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    k = min(order, len(eps) - 1)
    if k == 0:
        return float(values[-1])
    x, y = eps[-(k + 1):], values[-(k + 1):]
    # Lagrange basis at 0 (Neville would give the same number)
    total = 0.0
    for i in range(k + 1):
        w = 1.0
        for j in range(k + 1):
            if j != i:
                w *= x[j] / (x[j] - x[i])
        total += w * y[i]
    return float(total)


@dataclass
class MilnorEstimate:
    family: str
    muT_raw: float
    muN_raw: float
    muT: int | None
    muN: int | None
    table: list[TableEntry]
    stabilized: dict[float, bool]
    retained_eps: tuple[float, ...]
    l_eps: dict[float, tuple[float, float]]
    notes: list[str] = field(default_factory=list)

    @property
    def snapped(self) -> bool:
        return self.muT is not None and self.muN is not None

    def entry(self, eps: float, s: float) -> TableEntry:
        for e in self.table:
            if e.eps == eps and e.s == s:
                return e
        raise KeyError((eps, s))

    def table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "s", "lT", "lT_err", "lN", "lN_err"])
        for e in self.table:
            w.writerow([repr(e.eps), repr(e.s), f"{e.lT:.10f}", f"{e.lT_err:.3e}", f"{e.lN:.10f}", f"{e.lN_err:.3e}"])
        return buf.getvalue()


def compute_table(family: SurfaceFamily, schedule: LimitSchedule) -> list[TableEntry]:
    """Fill the (eps, s) table; entries are independent and computed concurrently."""
    pairs = schedule.pairs()
    jobs = sorted({(s, e) for e, s in pairs} | {(0.0, e) for e in schedule.eps})

    def work(job):
        s, e = job
        return region_integrals(family, s, e, schedule.rel_tol, schedule.abs_tol)

    with ThreadPoolExecutor(max_workers=worker_count()) as ex:
        results = dict(zip(jobs, ex.map(work, jobs)))
    return [TableEntry(e, s, results[(s, e)], results[(0.0, e)]) for e, s in pairs]


def _limit_values(table, schedule, getter):
    """Stabilised per-eps values and stabilisation flags for one quantity."""
    vals, flags = {}, {}
    for e, row in zip(schedule.eps, schedule.s):
        seq = [getter(t) for t in table if t.eps == e]
        vals[e] = seq[-1]
        flags[e] = len(seq) < 2 or abs(seq[-1] - seq[-2]) < schedule.theta_s
    return vals, flags


def extrapolate(table, schedule, getter):
    vals, flags = _limit_values(table, schedule, getter)
    kept = tuple(e for e in schedule.eps if flags[e])
    if not kept:
        return float("nan"), vals, flags, kept
    return richardson(kept, [vals[e] for e in kept], schedule.order), vals, flags, kept


def milnor_estimate(family: SurfaceFamily, schedule: LimitSchedule | None = None) -> MilnorEstimate:
    """Tangent and normal Milnor numbers at the family's singular point."""
    schedule = schedule or LimitSchedule.for_family(family)
    table = compute_table(family, schedule)
    notes = []
    if not all(t.converged for t in table):
        notes.append("quadrature budget exhausted for some entries")
    muT_raw, lT, fT, keptT = extrapolate(table, schedule, lambda t: t.lT)
    muN_raw, lN, fN, keptN = extrapolate(table, schedule, lambda t: t.lN)
    stabilized = {e: fT[e] and fN[e] for e in schedule.eps}
    for e, ok in stabilized.items():
        if not ok:
            notes.append(f"no stabilisation in s at eps={e}")
    muT = snap_integer(muT_raw, schedule.snap)
    muN = snap_integer(muN_raw, schedule.snap)
    if muT is None or muN is None:
        notes.append("snap failure")
    retained = tuple(e for e in schedule.eps if stabilized[e])
    return MilnorEstimate(family.name, muT_raw, muN_raw, muT, muN, table, stabilized, retained,
                          {e: (lT[e], lN[e]) for e in schedule.eps}, notes)


def eps_monotonicity(est: MilnorEstimate) -> bool:
    """Distance of l(eps) to the extrapolated value does not grow as eps shrinks.

    Distances below the quadrature error of the entry count as zero.
    """
    dev = []
    for e in est.retained_eps:
        lt, ln = est.l_eps[e]
        s_min = min(t.s for t in est.table if t.eps == e)
        entry = est.entry(e, s_min)
        tol = entry.lT_err + entry.lN_err + 1e-9
        d = max(abs(lt - est.muT_raw), abs(ln - est.muN_raw))
        dev.append(d if d > tol else 0.0)
    return all(b <= a + 1e-9 for a, b in zip(dev, dev[1:]))


# ---------------------------------------------------------------------------
# cross-checks


@dataclass
class EulerCheck:
    strand_sum: int
    chi_raw: float
    chi: int | None
    muT: int | None
    eps: float
    s: float

    @property
    def holds(self) -> bool:
        return self.chi is not None and self.muT is not None and self.strand_sum - self.chi == self.muT


def euler_limit_check(family: SurfaceFamily, schedule: LimitSchedule | None = None,
                      estimate: MilnorEstimate | None = None) -> EulerCheck:
    """sum s_i (m_i + 1) - chi(Sigma_s^eps) against muT, at the smallest scheduled (eps, s)."""
    from .diffgeo import gauss_bonnet_euler

    schedule = schedule or LimitSchedule.for_family(family)
    estimate = estimate or milnor_estimate(family, schedule)
    eps, s = schedule.eps[-1], schedule.s[-1][-1]
    gb = gauss_bonnet_euler(family, s, eps, schedule.rel_tol, schedule.snap)
    return EulerCheck(family.branch_data.strand_total, gb.chi_raw, gb.chi, estimate.muT, eps, s)


def trace_defect(family: SurfaceFamily, s: float, n: int = 64, seed: int = 0) -> float:
    """max |B11 + B22| / max(1, |B|) over random samples of the family charts."""
    worst = 0.0
    for frame, sff in _samples(family, s, n, seed):
        tr = np.linalg.norm(sff.B11 + sff.B22, axis=-1)
        size = np.sqrt(np.sum(sff.B11 ** 2 + 2 * sff.B12 ** 2 + sff.B22 ** 2, axis=-1))
        worst = max(worst, float(np.max(tr / np.maximum(1.0, size))))
    return worst


def minimal_milnor(family: SurfaceFamily, schedule: LimitSchedule | None = None, trace_tol: float = 1e-8):
    """Milnor numbers from the quadratic curvature integrands valid for minimal surfaces.

    Returns ((muT_raw, muN_raw), (muT, muN)).
    """
    if not family.has("minimal"):
        raise MinimalityError(f"family {family.name!r} is not flagged minimal")
    schedule = schedule or LimitSchedule.for_family(family)
    defect = trace_defect(family, schedule.s[0][-1])
    if defect > trace_tol:
        raise MinimalityError(f"trace of B is {defect:.2e}, above {trace_tol:.0e}")
    table = compute_table(family, schedule)
    t_raw = extrapolate(table, schedule, lambda t: t.diff("normB2") / (4 * np.pi))[0]
    n_raw = extrapolate(table, schedule, lambda t: t.diff("B12wB11") / np.pi)[0]
    return (t_raw, n_raw), (snap_integer(t_raw, schedule.snap), snap_integer(n_raw, schedule.snap))


def milnor_inequality_check(family: SurfaceFamily, estimate: MilnorEstimate) -> dict:
    """muT >= |muN|, with the hypotheses the family claims."""
    hyp = [h for h in ("embedded", "minimal") if family.has(h)]
    ok = estimate.snapped and estimate.muT >= abs(estimate.muN)
    return {"holds": bool(ok), "muT": estimate.muT, "muN": estimate.muN, "hypotheses": hyp}


def _samples(family: SurfaceFamily, s: float, n: int, seed: int):
    rng = np.random.default_rng(seed)
    for chart in family.charts_at(s):
        if isinstance(chart, ImplicitChart):
            rad = chart.base_radius * np.sqrt(rng.uniform(0.05, 1.0, n))
            pts = rad * np.exp(2j * np.pi * rng.uniform(size=n))
            disc = chart.discriminant_points(s)
            if disc.size:
                keep = np.min(np.abs(pts[:, None] - disc[None, :]), axis=1) > 1e-2
                pts = pts[keep]
        else:
            lo = max(chart.r_in, 0.05 * chart.r_out)
            rad = np.sqrt(rng.uniform(lo ** 2, chart.r_out ** 2, n))
            pts = rad * np.exp(2j * np.pi * rng.uniform(size=n))
        jet = jets_at(chart, pts, s)
        frame = adapted_frame(jet)
        yield frame, second_fundamental_form(jet, frame)


def superminimality_defect(family: SurfaceFamily, s: float, n: int = 64, seed: int = 0) -> float:
    """max |B(e1, J e2) - J_N B(e1, e2)| over random samples (J e2 = -e1)."""
    worst = 0.0
    for frame, sff in _samples(family, s, n, seed):
        JB12 = np.stack([-sff.B12[..., 1], sff.B12[..., 0]], axis=-1)
        worst = max(worst, float(np.max(np.linalg.norm(-sff.B11 - JB12, axis=-1))))
    return worst


def classical_milnor(family: SurfaceFamily, estimate: MilnorEstimate) -> int | None:
    """muT - (N - 1) for single-branch families; None otherwise (meaning unresolved)."""
    br = family.branches
    if len(br) != 1 or estimate.muT is None:
        return None
    return estimate.muT - (br[0].N - 1)
