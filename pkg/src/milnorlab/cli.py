"""Command line front-end: ``milnorlab run | list-presets | slice``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dsl import DslError, parse_family
from .germ import SurfaceFamily

ANALYSES = ("milnor", "euler", "braid", "grassmann", "bennequin", "superminimal", "es", "liftarea")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    preset: str | None = None
    family_file: str | None = None
    analyses: tuple[str, ...] = ANALYSES
    eps: tuple[float, ...] | None = None
    s: tuple[float, ...] | None = None
    out: str | None = None
    tol_rel: float = 1e-4
    snap: float = 0.1

    def __post_init__(self):
        if (self.preset is None) == (self.family_file is None):
            raise ConfigError("give exactly one of --preset or --family")
        bad = [a for a in self.analyses if a not in ANALYSES]
        if bad:
            raise ConfigError(f"unknown analysis {bad[0]!r}; choose from {', '.join(ANALYSES)} or 'all'")
        if self.tol_rel <= 0 or self.snap <= 0:
            raise ConfigError("tolerance overrides must be positive")
        for name in ("eps", "s"):
            v = getattr(self, name)
            if v is not None and (min(v) <= 0):
                raise ConfigError(f"--{name} values must be positive")
        if self.preset is not None:
            from .presets import preset_names

            if self.preset.upper() not in preset_names():
                raise ConfigError(f"unknown preset {self.preset!r}; available: {', '.join(preset_names())}")


@dataclass
class Block:
    name: str
    lines: list[tuple[str, str]] = field(default_factory=list)
    checks: list[tuple[str, bool]] = field(default_factory=list)

    def put(self, key: str, value) -> None:
        self.lines.append((key, _fmt(value)))

    def check(self, name: str, ok: bool) -> None:
        self.checks.append((name, bool(ok)))

    def text(self) -> str:
        out = [f"[{self.name}]"]
        out += [f"{k} = {v}" for k, v in self.lines]
        out += [f"check.{n} = {'pass' if ok else 'FAIL'}" for n, ok in self.checks]
        return "\n".join(out)


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if abs(v) >= 1e6:
            return f"{float(v):.10e}"
        return f"{round(float(v), 10) + 0.0:.10f}"  # + 0.0 drops the sign of -0
    if isinstance(v, (list, tuple, np.ndarray)):
        return "(" + ", ".join(_fmt(x) for x in np.asarray(v).ravel().tolist()) + ")" if len(v) else "()"
    return str(v)


def _raw_snap(block: Block, key: str, raw: float, snapped) -> None:
    block.put(f"{key}_raw", raw)
    block.put(key, snapped)


def convention_fingerprint() -> list[tuple[str, str]]:
    from .braid import hopf_reference

    hopf = hopf_reference()
    return [
        ("orientation", "C2 -> R4 by (re c1, im c1, re c2, im c2); (e1, e2, e3, e4) positive"),
        ("normal_orientation", "(e3, e4) positive iff (e1, e2, e3, e4) positive"),
        ("crossing_sign", "right-handed +1; stereographic chart oriented as the boundary of the ball"),
        ("hopf_reference_sign", str(int(np.sign(hopf.raw)))),
        ("lift_metric", "R4 plus |dP|^2 on unit 2-vectors (Lambda+- spheres of radius 1/sqrt(2))"),
        ("muN_sign", "muN = -(1/2pi) lim [int OmegaN(s) - int OmegaN(0)], OmegaN = (B11 - B22) ^ B12"),
    ]


def load_family(config: RunConfig) -> SurfaceFamily:
    if config.preset is not None:
        from .presets import get_preset

        return get_preset(config.preset)
    return parse_family(Path(config.family_file).read_text())


def run(config: RunConfig) -> tuple[str, dict[str, str], bool]:
    """Run the analyses; returns (report text, {file name: contents}, all checks passed)."""
    from .milnor import LimitSchedule

    family = load_family(config)
    schedule = LimitSchedule.for_family(family, config.eps, config.s, rel_tol=config.tol_rel, snap=config.snap)
    header = Block("provenance")
    header.put("milnorlab_version", __version__)
    header.put("family", family.name)
    header.put("source", config.preset.upper() if config.preset else config.family_file)
    header.put("flags", ", ".join(sorted(family.flags)) or "none")
    header.put("eps_schedule", schedule.eps)
    header.put("s_schedule", schedule.s[0])
    header.put("tol_rel", schedule.rel_tol)
    header.put("tol_abs", schedule.abs_tol)
    header.put("snap", schedule.snap)
    header.put("stabilisation_threshold", schedule.theta_s)
    header.put("extrapolation_order", schedule.order)
    for k, v in convention_fingerprint():
        header.put(f"convention.{k}", v)

    ctx: dict = {"family": family, "schedule": schedule}
    files: dict[str, str] = {}
    blocks = [header]
    for name in ANALYSES:
        if name not in config.analyses:
            continue
        block = Block(name)
        try:
            RUNNERS[name](ctx, block, files)
        except Exception as exc:  # report and continue with the next analysis
            block.put("error", f"[{name}] {type(exc).__name__}: {exc}")
            block.check("completed", False)
        blocks.append(block)
    ok = all(c for b in blocks for _, c in b.checks)
    summary = Block("summary")
    failed = [f"{b.name}.{n}" for b in blocks for n, c in b.checks if not c]
    summary.put("status", "pass" if ok else "fail")
    summary.put("failed_checks", ", ".join(failed) or "none")
    text = "\n\n".join(b.text() for b in blocks + [summary]) + "\n"
    files["report.txt"] = text
    return text, files, ok


# ---------------------------------------------------------------------------
# analyses


def _estimate(ctx):
    from .milnor import milnor_estimate

    if "estimate" not in ctx:
        ctx["estimate"] = milnor_estimate(ctx["family"], ctx["schedule"])
    return ctx["estimate"]


def _run_milnor(ctx, block: Block, files):
    from .milnor import classical_milnor, eps_monotonicity, minimal_milnor, milnor_inequality_check

    fam, sch = ctx["family"], ctx["schedule"]
    est = _estimate(ctx)
    _raw_snap(block, "muT", est.muT_raw, est.muT)
    _raw_snap(block, "muN", est.muN_raw, est.muN)
    for e in sch.eps:
        block.put(f"l_eps[{e!r}]", est.l_eps[e])
        block.put(f"stabilized[{e!r}]", est.stabilized[e])
    for note in est.notes:
        block.put("note", note)
    block.check("snap", est.snapped)
    block.check("stabilization", all(est.stabilized.values()))
    block.check("eps_monotone", eps_monotonicity(est))
    if fam.has("holomorphic"):
        block.put("muT_plus_muN_raw", est.muT_raw + est.muN_raw)
        block.check("holomorphic_identity", abs(est.muT_raw + est.muN_raw) < sch.snap)
    if fam.has("minimal"):
        (t_raw, n_raw), (t, n) = minimal_milnor(fam, sch)
        _raw_snap(block, "minimal.muT", t_raw, t)
        _raw_snap(block, "minimal.muN", n_raw, n)
        block.check("method_agreement", abs(t_raw - est.muT_raw) < 0.1 and abs(n_raw - est.muN_raw) < 0.1)
    ineq = milnor_inequality_check(fam, est)
    block.put("inequality.hypotheses", ", ".join(ineq["hypotheses"]) or "none")
    block.put("inequality.muT_ge_abs_muN", ineq["holds"])
    if ineq["hypotheses"]:
        block.check("muT_ge_abs_muN", ineq["holds"])
    block.put("classical_milnor", classical_milnor(fam, est))
    files["milnor_table.csv"] = est.table_csv()


def _run_euler(ctx, block: Block, files):
    from .milnor import euler_limit_check

    chk = euler_limit_check(ctx["family"], ctx["schedule"], _estimate(ctx))
    block.put("eps", chk.eps)
    block.put("s", chk.s)
    block.put("strand_sum", chk.strand_sum)
    _raw_snap(block, "chi", chk.chi_raw, chk.chi)
    block.put("muT", chk.muT)
    block.check("chi_snap", chk.chi is not None)
    block.check("strand_sum_minus_chi_eq_muT", chk.holds)


def _run_braid(ctx, block: Block, files):
    from .braid import axis_test, braid_invariants, branch_planes, framing_independence, normal_linking_check
    from .quadrature import boundary_integral, region_integrals

    fam, sch = ctx["family"], ctx["schedule"]
    eps, s = sch.eps[-1], sch.s[-1][-1]
    planes = branch_planes(fam)
    for label, ss in (("sigma0", 0.0), ("sigma_s", s)):
        sl, inv = braid_invariants(fam, ss, eps)
        pre = f"{label}."
        block.put(pre + "eps", sl.eps)
        block.put(pre + "components", len(sl.components))
        block.put(pre + "strands", inv.n)
        _raw_snap(block, pre + "e", inv.e_raw, inv.e)
        block.put(pre + "lk_raw", inv.lk_raw)
        block.put(pre + "lk", inv.lk)
        block.put(pre + "embedded", sl.embedded())
        block.put(pre + "sphere_residual", sl.sphere_residual())
        if len(planes) == 1:
            ax = axis_test(sl, planes[0])
            block.put(pre + "axis.min_radius2", ax.min_radius2)
            block.put(pre + "axis.min_angular", ax.min_angular)
            block.put(pre + "axis.verdict", ax.verdict)
        es = framing_independence(fam, ss, eps)
        block.put(pre + "e_by_framing", es)
        block.check(pre + "framing_independence", len(es) >= 2 and len(set(es)) == 1)
        block.check(pre + "e_snap", inv.e is not None)
        if label == "sigma0":
            block.check("strand_total_matches_branches", inv.n == fam.branch_data.strand_total)
            files["slice_sigma0.csv"] = sl.to_csv()
        else:
            om = boundary_integral(fam, ss, eps, "omegaN", inv.X)
            curv = region_integrals(fam, ss, eps, sch.rel_tol).values["OmegaN"]
            zeros = (curv - om[0]) / (2 * np.pi)
            block.put("index.zero_count_raw", zeros)
            block.put("index.framing_min_normal_part", om[2])
            if fam.has("embedded") and inv.e is not None:
                block.check("index_zero_count_eq_e", abs(zeros - inv.e) < 0.1)
                est = ctx.get("estimate")
                if est is not None:
                    block.put("index.minus_muN_raw", -est.muN_raw)
                    block.check("index_e_eq_minus_muN", abs(-est.muN_raw - inv.e) < 0.1)
    if "estimate" in ctx:
        nl = normal_linking_check(fam, ctx["estimate"].muN, eps)
        block.put("normal_linking.muN", nl.muN)
        block.put("normal_linking.e_sigma0", nl.e)
        block.put("normal_linking.relative_sign", nl.sign)
        if fam.has("embedded") or fam.has("in_r3"):
            block.check("normal_linking_abs_equal", nl.holds)


def _run_grassmann(ctx, block: Block, files):
    from .grassmann import bubble_degrees, fiber_degree, complex_structure_table

    fam, sch = ctx["family"], ctx["schedule"]
    deg = bubble_degrees(fam, sch)
    _raw_snap(block, "a", deg.a_raw, deg.a)
    _raw_snap(block, "b", deg.b_raw, deg.b)
    block.put("snap_step", deg.step)
    block.check("degree_snap", deg.a is not None and deg.b is not None)
    est = ctx.get("estimate")
    if est is not None:
        block.check("degree_sum_consistency", deg.consistent_with(est.muT_raw, est.muN_raw))
    if fam.has("holomorphic"):
        block.check("holomorphic_a_zero", abs(deg.a_raw) < 1e-6)
    table = complex_structure_table()
    for name, (got, want) in table.items():
        block.put(f"complex_structure.{name}", "exact" if np.array_equal(got, want) else f"mismatch {np.abs(got - want).max():.3e}")
    block.check("complex_structure_table", all(np.array_equal(g, w) for g, w in table.values()))
    fd = (fiber_degree("minus"), fiber_degree("plus"))
    block.put("fiber_degree", fd)
    block.check("fiber_degree_calibration", abs(fd[0] - 1) < 1e-12 and abs(fd[1] - 1) < 1e-12)
    lines = ["eps,s,a,b"] + [f"{e!r},{s!r},{a:.10f},{b:.10f}" for e, s, a, b in deg.table]
    files["degrees.csv"] = "\n".join(lines) + "\n"


def _run_bennequin(ctx, block: Block, files):
    from .braid import bennequin_check

    fam, sch = ctx["family"], ctx["schedule"]
    rep = bennequin_check(fam, sch.s[-1][-1], sch.eps[-1])
    block.put("chi", rep.chi)
    block.put("n", rep.n)
    block.put("e", rep.e)
    block.put("applicable", rep.applicable)
    block.put("chi_le_n_minus_e", rep.slice_bennequin)
    block.put("abs_e_le_minus_chi_plus_n", rep.linking_bound)
    if rep.applicable:
        block.check("slice_bennequin", rep.slice_bennequin)
        block.check("linking_bound", rep.linking_bound)


def _run_superminimal(ctx, block: Block, files):
    from .milnor import superminimality_defect

    fam, sch = ctx["family"], ctx["schedule"]
    d = superminimality_defect(fam, sch.s[0][-1])
    block.put("defect", d)
    if fam.has("holomorphic"):
        block.check("defect_small", d < 1e-8)
        est = ctx.get("estimate")
        if est is not None and est.snapped:
            block.check("muN_eq_minus_muT", est.muN == -est.muT)


def _run_es(ctx, block: Block, files):
    from .germ import ImplicitChart
    from .grassmann import es_residual

    fam, sch = ctx["family"], ctx["schedule"]
    s = sch.s[0][-1]
    chart = fam.charts_at(s)[0]
    rng = np.random.default_rng(2024)
    if isinstance(chart, ImplicitChart):
        R, lo = chart.base_radius, 0.05
    else:
        R, lo = chart.r_out, max(chart.r_in / chart.r_out, 0.05)
    z = R * np.sqrt(rng.uniform(lo ** 2, 1, 50)) * np.exp(2j * np.pi * rng.uniform(size=50))
    res = float(np.max(es_residual(fam, s, z)))
    block.put("samples", 50)
    block.put("max_residual", res)
    if fam.has("minimal"):
        block.check("residual_small", res < 1e-6)


def _run_liftarea(ctx, block: Block, files):
    from .grassmann import lift_area_bounds

    fam, sch = ctx["family"], ctx["schedule"]
    reports, c3 = lift_area_bounds(fam, sch.eps[0], sch.rel_tol)
    for r in reports:
        block.put(f"lift_area[{r.s!r}]", r.lift_area)
        block.put(f"bound[{r.s!r}]", r.bound)
        block.put(f"flat[{r.s!r}]", r.flat)
    block.put("C3", c3)
    block.check("area_inequality", all(r.holds() for r in reports))
    lifts = [r.lift_area for r in reports]
    block.check("common_bound", max(lifts) <= 1.5 * min(lifts))


RUNNERS = {
    "milnor": _run_milnor,
    "euler": _run_euler,
    "braid": _run_braid,
    "grassmann": _run_grassmann,
    "bennequin": _run_bennequin,
    "superminimal": _run_superminimal,
    "es": _run_es,
    "liftarea": _run_liftarea,
}


# ---------------------------------------------------------------------------
# argument parsing


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _analyses(text: str) -> tuple[str, ...]:
    items = tuple(x.strip().lower() for x in text.split(",") if x.strip())
    if items == ("all",):
        return ANALYSES
    for a in items:
        if a not in ANALYSES:
            raise argparse.ArgumentTypeError(f"unknown analysis {a!r}; choose from {', '.join(ANALYSES)} or all")
    return items


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="milnorlab", description=__doc__)
    ap.add_argument("--version", action="version", version=f"milnorlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run analyses on a preset or a family file")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset")
    src.add_argument("--family", dest="family_file")
    r.add_argument("--analyses", type=_analyses, default=ANALYSES)
    r.add_argument("--eps", type=_floats)
    r.add_argument("--s", type=_floats)
    r.add_argument("--out")
    r.add_argument("--tol-rel", type=float, default=1e-4)
    r.add_argument("--snap", type=float, default=0.1)
    lp = sub.add_parser("list-presets", help="built-in families and their expected invariants")
    lp.add_argument("--csv", action="store_true")
    sl = sub.add_parser("slice", help="export the link Sigma_s cap S(p, eps) as CSV polylines")
    sl.add_argument("--preset", required=True)
    sl.add_argument("--s", type=float, required=True)
    sl.add_argument("--eps", type=float, required=True)
    sl.add_argument("--out", required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-presets":
        from .presets import preset_table

        sys.stdout.write(preset_table(as_csv=args.csv))
        return 0
    if args.command == "slice":
        from .braid import SliceError, slice_sphere
        from .presets import get_preset

        try:
            fam = get_preset(args.preset)
            sl = slice_sphere(fam, args.s, args.eps)
        except (KeyError, SliceError, ValueError) as exc:
            print(f"error [braid]: {exc}", file=sys.stderr)
            return 2
        Path(args.out).write_text(sl.to_csv())
        print(f"wrote {len(sl.components)} component(s), {sl.n_vertices()} vertices to {args.out}")
        return 0
    try:
        config = RunConfig(args.preset, args.family_file, args.analyses, args.eps, args.s, args.out,
                           args.tol_rel, args.snap)
        text, files, ok = run(config)
    except ConfigError as exc:
        print(f"error [cli]: {exc}", file=sys.stderr)
        return 2
    except DslError as exc:
        print(f"error [germ]: {args.family_file}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error [cli]: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(text)
    if config.out:
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, content in sorted(files.items()):
            (out / name).write_text(content)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
