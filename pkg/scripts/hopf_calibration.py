"""Linking-number calibration on the Hopf link of the unit 3-sphere.

Prints the raw linking number of (cos t, sin t, 0, 0) and (0, 0, cos t, sin t)
for both integration rules as the number of vertices doubles. The midpoint
rule converges at second order; the exact segment-pair rule is an integer to
rounding at every resolution.
"""

from milnorlab.braid import hopf_reference

print(f"{'vertices':>8}  {'midpoint raw':>16}  {'deviation':>10}  {'ratio':>6}  {'polygon raw':>18}")
prev = None
for n in (90, 180, 360, 720, 1440, 2880):
    mid = hopf_reference(n, method="midpoint")
    poly = hopf_reference(n, method="polygon")
    ratio = f"{prev / mid.deviation:6.2f}" if prev else "     -"
    print(f"{n:>8}  {mid.raw:16.12f}  {mid.deviation:10.3e}  {ratio}  {poly.raw:18.14f}")
    prev = mid.deviation
