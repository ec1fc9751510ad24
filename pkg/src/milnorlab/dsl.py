"""Reader and writer for the line-oriented family description format.

A document is a sequence of sections::

    [family]
    name = "node"
    flags = holomorphic, minimal
    p = (0, 0, 0, 0)
    s_schedule = 1e-4, 2.5e-5
    eps_schedule = 0.2, 0.1

    [chart "main"]
    domain = annulus(0, 1.0)
    map_c = ((z - s/z)/2, (z + s/z)/2)
    role = family                # both (default) | family | limit

    [implicit "fiber"]
    P = y^2 - x^3 - s
    base = x
    sheets = 2
    base_domain = disc(0.7)

    [branch]
    branches = (N=1, s=1), (N=1, s=1)

``#`` starts a comment. Errors carry 1-based line and column numbers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .expr import (
    EXPLICIT_VARS,
    IMPLICIT_VARS,
    ExprSemanticError,
    ExprSyntaxError,
    parse_expr,
    to_text,
)
from .germ import (
    Branch,
    ExplicitChart,
    ImplicitChart,
    SurfaceFamily,
    ValidationError,
    validate_family,
)

KNOWN_FLAGS = ("holomorphic", "minimal", "embedded", "in_r3")
SECTION_KEYS = {
    "family": {"name", "flags", "p", "s_schedule", "eps_schedule"},
    "chart": {"domain", "map_c", "map_r", "multiplicity", "role"},
    "implicit": {"P", "base", "sheets", "base_domain", "rho_cut", "multiplicity", "role"},
    "branch": {"branches"},
}


class DslError(ValueError):
    """Problem in a family document, located at (line, col)."""

    kind = "error"

    def __init__(self, message: str, line: int = 0, col: int = 0, expected: str | None = None):
        self.message = message
        self.line = line
        self.col = col
        self.expected = expected
        loc = f"line {line}, column {col}: " if line else ""
        super().__init__(f"{self.kind}: {loc}{message}")


class DslSyntaxError(DslError):
    kind = "syntax error"


class DslSemanticError(DslError):
    kind = "semantic error"


class DslValidationError(DslError):
    kind = "validation error"


@dataclass
class _Value:
    text: str
    line: int
    col: int  # 1-based column of text[0]


@dataclass
class _Section:
    kind: str
    label: str | None
    line: int
    items: dict[str, _Value]


def _strip_comment(line: str) -> str:
    out, quoted = [], False
    for ch in line:
        if ch == '"':
            quoted = not quoted
        if ch == "#" and not quoted:
            break
        out.append(ch)
    return "".join(out)


_HEADER = re.compile(r'^\[\s*([A-Za-z_]+)\s*(?:"([^"]*)")?\s*\]$')
_KEY = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)\s*=\s*(.*)$")


def _sections(text: str) -> list[_Section]:
    sections: list[_Section] = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        body = line.strip()
        if body.startswith("["):
            m = _HEADER.match(body)
            if not m:
                raise DslSyntaxError("malformed section header", ln, indent + 1, '[name] or [name "label"]')
            kind, label = m.group(1), m.group(2)
            if kind not in SECTION_KEYS:
                raise DslSemanticError(f"unknown section [{kind}]", ln, indent + 2)
            if kind in ("chart", "implicit") and not label:
                raise DslSyntaxError(f"section [{kind}] needs a quoted label", ln, indent + 1, '"label"')
            sections.append(_Section(kind, label, ln, {}))
            continue
        m = _KEY.match(body)
        if not m:
            raise DslSyntaxError("expected 'key = value'", ln, indent + 1, "=")
        if not sections:
            raise DslSyntaxError("key outside of any section", ln, indent + 1, "[section]")
        sec = sections[-1]
        key, value = m.group(1), m.group(2)
        if key not in SECTION_KEYS[sec.kind]:
            raise DslSemanticError(f"unknown key {key!r} in [{sec.kind}]", ln, indent + 1)
        if key in sec.items:
            raise DslSemanticError(f"duplicate key {key!r}", ln, indent + 1)
        if not value.strip():
            raise DslSyntaxError(f"missing value for {key!r}", ln, indent + len(body) + 1, "value")
        sec.items[key] = _Value(value, ln, indent + 1 + m.start(2))
    return sections


def _split_top(v: _Value, sep: str = ",") -> list[_Value]:
    """Split at top-level separators, keeping column offsets."""
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(v.text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise DslSyntaxError("unbalanced ')'", v.line, v.col + i)
        elif ch == sep and depth == 0:
            parts.append((start, v.text[start:i]))
            start = i + 1
    if depth > 0:
        raise DslSyntaxError("expected ')'", v.line, v.col + len(v.text), ")")
    parts.append((start, v.text[start:]))
    out = []
    for off, t in parts:
        lead = len(t) - len(t.lstrip())
        out.append(_Value(t.strip(), v.line, v.col + off + lead))
    return out


def _unwrap(v: _Value) -> _Value:
    """Remove one pair of enclosing parentheses."""
    t = v.text.strip()
    if not t.startswith("("):
        raise DslSyntaxError("expected '('", v.line, v.col, "(")
    depth = 0
    for i, ch in enumerate(t):
        depth += ch == "("
        depth -= ch == ")"
        if depth == 0:
            if i != len(t) - 1:
                raise DslSyntaxError("unexpected text after ')'", v.line, v.col + i + 1)
            inner = t[1:-1]
            lead = len(inner) - len(inner.lstrip())
            return _Value(inner.strip(), v.line, v.col + 1 + lead)
    raise DslSyntaxError("expected ')'", v.line, v.col + len(t), ")")


def _expr(v: _Value, variables):
    try:
        return parse_expr(v.text, variables)
    except ExprSyntaxError as exc:
        raise DslSyntaxError(str(exc), v.line, v.col + exc.pos, exc.expected) from None
    except ExprSemanticError as exc:
        raise DslSemanticError(str(exc), v.line, v.col) from None


def _number(v: _Value, kind=float):
    try:
        return kind(v.text)
    except ValueError:
        raise DslSyntaxError(f"expected a number, got {v.text!r}", v.line, v.col, "number") from None


def _numbers(v: _Value) -> tuple[float, ...]:
    return tuple(_number(p) for p in _split_top(v))


def _call(v: _Value, name: str, nargs: int) -> tuple[float, ...]:
    t = v.text
    if not t.startswith(name):
        raise DslSyntaxError(f"expected {name}(...)", v.line, v.col, f"{name}(")
    inner = _unwrap(_Value(t[len(name):].strip(), v.line, v.col + len(name)))
    args = _numbers(inner)
    if len(args) != nargs:
        raise DslSyntaxError(f"{name} takes {nargs} argument(s)", v.line, v.col)
    return args


def _family_block(sec: _Section) -> dict:
    it = sec.items
    out = {}
    if "name" not in it:
        raise DslSemanticError("[family] needs a name", sec.line, 1)
    name = it["name"].text
    if not (len(name) >= 2 and name[0] == name[-1] == '"'):
        raise DslSyntaxError("name must be a quoted string", it["name"].line, it["name"].col, '"')
    out["name"] = name[1:-1]
    if "flags" in it:
        flags = [p.text for p in _split_top(it["flags"])]
        for f, pv in zip(flags, _split_top(it["flags"])):
            if f not in KNOWN_FLAGS:
                raise DslSemanticError(f"unknown flag {f!r}", pv.line, pv.col)
        out["flags"] = frozenset(flags)
    if "p" in it:
        p = _numbers(_unwrap(it["p"]))
        if len(p) != 4:
            raise DslSemanticError("p must have 4 coordinates", it["p"].line, it["p"].col)
        out["p"] = p
    for key in ("s_schedule", "eps_schedule"):
        if key in it:
            out[key] = _numbers(it[key])
    return out


def _common(sec: _Section) -> dict:
    kw = {}
    it = sec.items
    if "multiplicity" in it:
        kw["multiplicity"] = _number(it["multiplicity"], int)
    if "role" in it:
        role = it["role"].text
        if role not in ("both", "family", "limit"):
            raise DslSemanticError(f"unknown role {role!r}", it["role"].line, it["role"].col)
        kw["role"] = role
    return kw


def _chart(sec: _Section) -> ExplicitChart:
    it = sec.items
    kw = _common(sec)
    if "domain" in it:
        d = it["domain"]
        if d.text.startswith("annulus"):
            kw["r_in"], kw["r_out"] = _call(d, "annulus", 2)
        else:
            kw["r_out"] = _call(d, "disc", 1)[0]
    if ("map_c" in it) == ("map_r" in it):
        raise DslSemanticError(f'chart "{sec.label}" needs exactly one of map_c, map_r', sec.line, 1)
    key = "map_c" if "map_c" in it else "map_r"
    parts = _split_top(_unwrap(it[key]))
    want = 2 if key == "map_c" else 4
    if len(parts) != want:
        raise DslSemanticError(f"{key} needs {want} coordinates, got {len(parts)}", it[key].line, it[key].col)
    exprs = [_expr(p, EXPLICIT_VARS) for p in parts]
    try:
        if key == "map_c":
            return ExplicitChart.from_complex(sec.label, exprs[0], exprs[1], **kw)
        return ExplicitChart(sec.label, tuple(exprs), **kw)
    except (ValueError, ZeroDivisionError) as exc:
        raise DslSemanticError(str(exc), sec.line, 1) from None


def _implicit(sec: _Section) -> ImplicitChart:
    it = sec.items
    kw = _common(sec)
    if "P" not in it:
        raise DslSemanticError(f'implicit "{sec.label}" needs P', sec.line, 1)
    P = _expr(it["P"], IMPLICIT_VARS)
    if "base" in it:
        kw["base"] = it["base"].text
    if "sheets" in it:
        kw["sheets"] = _number(it["sheets"], int)
    if "base_domain" in it:
        kw["base_radius"] = _call(it["base_domain"], "disc", 1)[0]
    if "rho_cut" in it:
        kw["rho_cut"] = _number(it["rho_cut"])
    try:
        return ImplicitChart(sec.label, P, **kw)
    except ValueError as exc:
        raise DslSemanticError(str(exc), sec.line, 1) from None


_BRANCH = re.compile(r"^N\s*=\s*(\d+)\s*,\s*s\s*=\s*(\d+)$")


def _branches(sec: _Section) -> tuple[Branch, ...]:
    v = sec.items.get("branches")
    if v is None:
        raise DslSemanticError("[branch] needs 'branches'", sec.line, 1)
    out = []
    for part in _split_top(v):
        inner = _unwrap(part)
        m = _BRANCH.match(inner.text)
        if not m:
            raise DslSyntaxError("expected (N=<int>, s=<int>)", inner.line, inner.col, "N=")
        N, s = int(m.group(1)), int(m.group(2))
        if N < 1 or s < 1:
            raise DslSemanticError("branch N and s must be >= 1", inner.line, inner.col)
        out.append(Branch(N, s))
    return tuple(out)


def parse_family(text: str, validate: bool = True) -> SurfaceFamily:
    """Parse (and by default validate) a family document."""
    sections = _sections(text)
    fam = [s for s in sections if s.kind == "family"]
    br = [s for s in sections if s.kind == "branch"]
    charts = [s for s in sections if s.kind in ("chart", "implicit")]
    if len(fam) != 1:
        raise DslSemanticError("exactly one [family] section required", fam[1].line if fam else 0, 1)
    if len(br) != 1:
        raise DslSemanticError("exactly one [branch] section required", br[1].line if br else 0, 1)
    if not charts:
        raise DslSemanticError("missing section: at least one [chart] or [implicit]")
    labels = [s.label for s in charts]
    for i, s in enumerate(charts):
        if s.label in labels[:i]:
            raise DslSemanticError(f"duplicate chart label {s.label!r}", s.line, 1)
    kw = _family_block(fam[0])
    built = tuple(_chart(s) if s.kind == "chart" else _implicit(s) for s in charts)
    family = SurfaceFamily(charts=built, branches=_branches(br[0]), **kw)
    if validate:
        try:
            validate_family(family)
        except (ValidationError, ValueError) as exc:
            raise DslValidationError(str(exc)) from None
    return family


def _fmt(x: float) -> str:
    return repr(float(x))


def print_family(family: SurfaceFamily) -> str:
    """Canonical text of a family; ``parse_family(print_family(f)) == f``."""
    lines = ["[family]", f'name = "{family.name}"']
    if family.flags:
        lines.append("flags = " + ", ".join(sorted(family.flags)))
    lines.append("p = (" + ", ".join(_fmt(x) for x in family.p) + ")")
    lines.append("s_schedule = " + ", ".join(_fmt(x) for x in family.s_schedule))
    lines.append("eps_schedule = " + ", ".join(_fmt(x) for x in family.eps_schedule))
    for c in family.charts:
        lines.append("")
        if isinstance(c, ExplicitChart):
            lines.append(f'[chart "{c.name}"]')
            lines.append(f"domain = annulus({_fmt(c.r_in)}, {_fmt(c.r_out)})")
            if c.complex_form is not None:
                lines.append("map_c = (" + ", ".join(to_text(e) for e in c.complex_form) + ")")
            else:
                lines.append("map_r = (" + ", ".join(to_text(e) for e in c.coords) + ")")
        else:
            lines.append(f'[implicit "{c.name}"]')
            lines.append(f"P = {to_text(c.P)}")
            lines.append(f"base = {c.base}")
            lines.append(f"sheets = {c.sheets}")
            lines.append(f"base_domain = disc({_fmt(c.base_radius)})")
            if c.rho_cut is not None:
                lines.append(f"rho_cut = {_fmt(c.rho_cut)}")
        lines.append(f"multiplicity = {c.multiplicity}")
        lines.append(f"role = {c.role}")
    lines += ["", "[branch]", "branches = " + ", ".join(f"(N={b.N}, s={b.s})" for b in family.branches)]
    return "\n".join(lines) + "\n"
