"""Run every analysis on every built-in preset and print a one-line summary per preset.

Usage: python3 scripts/run_all_presets.py [OUTDIR]

Each preset's report and CSV tables are written to OUTDIR/<preset>/.
"""

import sys
import time
from pathlib import Path

from milnorlab.cli import RunConfig, run
from milnorlab.presets import EXPECTED, preset_names


def summary_value(text, block, key):
    lines = text.split(f"[{block}]\n", 1)[1].split("\n\n", 1)[0].splitlines()
    for line in lines:
        k, _, v = line.partition(" = ")
        if k == key:
            return v
    return "-"


def main(outdir="preset_runs"):
    out = Path(outdir)
    print(f"{'preset':<10} {'muT':>4} {'muN':>4} {'chi':>4} {'e':>4} {'a':>5} {'b':>5}  expected(muT,muN)  status  time")
    all_ok = True
    for name in preset_names():
        t0 = time.perf_counter()
        text, files, ok = run(RunConfig(preset=name, out=str(out / name)))
        (out / name).mkdir(parents=True, exist_ok=True)
        for fname, content in files.items():
            (out / name / fname).write_text(content)
        exp = EXPECTED[name]
        cols = [summary_value(text, "milnor", "muT"), summary_value(text, "milnor", "muN"),
                summary_value(text, "euler", "chi"), summary_value(text, "braid", "sigma0.e"),
                summary_value(text, "grassmann", "a"), summary_value(text, "grassmann", "b")]
        cols[4:] = [c[:5] for c in cols[4:]]
        print(f"{name:<10} {cols[0]:>4} {cols[1]:>4} {cols[2]:>4} {cols[3]:>4} {cols[4]:>5} {cols[5]:>5}  "
              f"({exp.muT:>2},{exp.muN:>3})          {'pass' if ok else 'FAIL':<6}  "
              f"{time.perf_counter() - t0:.1f}s")
        all_ok &= ok
    return 0 if all_ok else 1


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:]))
