"""Double-limit table of a preset: l(eps, s) for every scheduled pair plus extrapolations.

Usage: python3 scripts/convergence_study.py [PRESET] [--order K]
"""

import argparse

from milnorlab.milnor import LimitSchedule, milnor_estimate
from milnorlab.presets import get_preset, preset_names

ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
ap.add_argument("preset", nargs="?", default="NODE", choices=[n.lower() for n in preset_names()] + list(preset_names()))
ap.add_argument("--order", type=int, default=1, help="extrapolation order in eps")
args = ap.parse_args()

fam = get_preset(args.preset)
est = milnor_estimate(fam, LimitSchedule.for_family(fam, order=args.order))
print(f"{fam.name}: {len(est.table)} table entries")
print(f"{'eps':>8} {'s':>10} {'lT':>14} {'lN':>14} {'err':>9}")
for t in est.table:
    print(f"{t.eps:8.4f} {t.s:10.3e} {t.lT:14.10f} {t.lN:14.10f} {t.lT_err + t.lN_err:9.2e}")
print()
for e in fam.eps_schedule:
    lt, ln = est.l_eps[e]
    print(f"l(eps={e}) = ({lt:.8f}, {ln:.8f})  stabilised={est.stabilized[e]}")
print(f"muT = {est.muT_raw:.8f} -> {est.muT}")
print(f"muN = {est.muN_raw:.8f} -> {est.muN}")
for note in est.notes:
    print("note:", note)
