"""Built-in degenerating families with their expected invariants."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import lru_cache

from .dsl import parse_family
from .germ import SurfaceFamily


@dataclass(frozen=True)
class Expected:
    muT: int
    muN: int
    chi: int
    strands: int
    e: int | None  # self-linking of the slice of Sigma_0 (None: slice is not embedded)
    a: float
    b: float
    description: str


PRESET_TEXT = {
    "PLANE": '''
[family]
name = "PLANE"
flags = holomorphic, minimal, embedded
s_schedule = 1e-2, 2.5e-3, 6.25e-4
eps_schedule = 0.2, 0.1, 0.05

[chart "plane"]
domain = disc(1)
map_c = (z, 0)

[branch]
branches = (N=1, s=1)
''',
    "NODE": '''
[family]
name = "NODE"
flags = holomorphic, minimal, embedded
s_schedule = 1e-4, 2.5e-5, 6.25e-6
eps_schedule = 0.2, 0.1, 0.05

[chart "fiber"]                 # uv = s after the rotation u = c2 - c1, v = c2 + c1
domain = annulus(0, 1)
map_c = ((z - s/z)/2, (z + s/z)/2)
role = family

[chart "branch+"]
domain = disc(1)
map_c = (z/2, z/2)
role = limit

[chart "branch-"]
domain = disc(1)
map_c = (-z/2, z/2)
role = limit

[branch]
branches = (N=1, s=1), (N=1, s=1)
''',
    "IMMCUSP": '''
[family]
name = "IMMCUSP"
flags = holomorphic, minimal
s_schedule = 1e-3, 2.5e-4, 6.25e-5
eps_schedule = 0.2, 0.1, 0.05

[chart "disc"]
domain = disc(1)
map_c = (z^2, z^3 + s*z)

[branch]
branches = (N=2, s=1)
''',
    "CUSPFIBER": '''
[family]
name = "CUSPFIBER"
flags = holomorphic, minimal, embedded
s_schedule = 2e-4, 5e-5, 1.25e-5
eps_schedule = 0.4, 0.3, 0.2

[implicit "fiber"]
P = y^2 - x^3 - s
base = x
sheets = 2
base_domain = disc(0.7)

[chart "cusp"]
domain = disc(1)
map_c = (z^2, z^3)
role = limit

[branch]
branches = (N=2, s=1)
''',
    "WHITNEY3D": '''
[family]
name = "WHITNEY3D"
flags = in_r3
s_schedule = 1e-3, 2.5e-4, 6.25e-5
eps_schedule = 0.2, 0.1, 0.05

[chart "disc"]
domain = disc(1)
map_r = (re(z^2), im(z^2), re(z^3) + s*re(z), 0)

[branch]
branches = (N=2, s=1)
''',
    "HOPFREF": '''
[family]
name = "HOPFREF"
flags = holomorphic, minimal
s_schedule = 1e-2, 2.5e-3, 6.25e-4
eps_schedule = 0.2, 0.1, 0.05

[chart "first"]
domain = disc(1)
map_c = (z, 0)

[chart "second"]
domain = disc(1)
map_c = (0, z)

[branch]
branches = (N=1, s=1), (N=1, s=1)
''',
}

EXPECTED = {
    "PLANE": Expected(0, 0, 1, 1, 0, 0, 0, "flat disc, nothing degenerates"),
    "NODE": Expected(2, -2, 0, 2, 2, 0, 2, "uv = s smoothing of two transverse planes"),
    "IMMCUSP": Expected(1, -1, 1, 2, 3, 0, 1, "immersed discs (z^2, z^3 + s z) onto a cusp"),
    "CUSPFIBER": Expected(3, -3, -1, 2, 3, 0, 3, "Milnor fibers y^2 = x^3 + s of the cusp"),
    "WHITNEY3D": Expected(1, 0, 1, 2, None, 0.5, 0.5, "cusp-type family inside R^3 x {0}"),
    "HOPFREF": Expected(0, 0, 2, 2, 2, 0, 0, "two complex lines, linking reference"),
}


def preset_names() -> tuple[str, ...]:
    return tuple(PRESET_TEXT)


@lru_cache(maxsize=None)
def get_preset(name: str) -> SurfaceFamily:
    key = name.upper()
    if key not in PRESET_TEXT:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESET_TEXT)}")
    return parse_family(PRESET_TEXT[key])


def preset_table(as_csv: bool = False) -> str:
    cols = ["name", "muT", "muN", "chi", "strands", "e", "a", "b", "description"]
    rows = [[n, x.muT, x.muN, x.chi, x.strands, "" if x.e is None else x.e, x.a, x.b, x.description]
            for n, x in EXPECTED.items()]
    if as_csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        w.writerows(rows)
        return buf.getvalue()
    widths = [max(len(str(r[i])) for r in rows + [cols]) for i in range(len(cols))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    return "\n".join(fmt.format(*map(str, r)).rstrip() for r in [cols] + rows) + "\n"
