from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from milnorlab.braid import (
    SliceError,
    bennequin_check,
    braid_invariants,
    framing_independence,
    gauss_linking,
    hopf_reference,
    normal_linking_check,
    slice_sphere,
    stereographic,
)
from milnorlab.presets import EXPECTED, get_preset

ORIGIN = np.zeros(4)


def closed(points):
    return np.vstack([points, points[:1]])


def torus_component(k, phase, n=400, shift=0.0):
    t = 2 * np.pi * (np.arange(n) + shift) / n
    z1 = np.exp(1j * t)
    z2 = np.exp(1j * (k * t + phase))
    return closed(np.stack([z1.real, z1.imag, z2.real, z2.imag], axis=1) / np.sqrt(2))


def circle3(center, normal_axis, radius=1.0, n=300):
    t = 2 * np.pi * np.arange(n) / n
    pts = np.zeros((n, 3))
    a, b = [i for i in range(3) if i != normal_axis]
    pts[:, a], pts[:, b] = radius * np.cos(t), radius * np.sin(t)
    return closed(pts + np.asarray(center, dtype=float))


@lru_cache(maxsize=None)
def invariants(name, s):
    fam = get_preset(name)
    return braid_invariants(fam, s, fam.eps_schedule[-1])


@pytest.mark.parametrize("method", ["polygon", "midpoint"])
def test_hopf_reference_is_plus_one(method):
    lk = hopf_reference(method=method)
    assert lk.value == 1
    assert lk.deviation < (1e-10 if method == "polygon" else 1e-4)


def test_midpoint_rule_converges():
    assert hopf_reference(1440).deviation < hopf_reference(360).deviation


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 4), st.floats(0, 1))
def test_torus_links_on_the_sphere(k, shift):
    """Components w = +-z^k of the link of w^2 = z^(2k) link k times."""
    A = torus_component(k, 0.0, shift=shift)
    B = torus_component(k, np.pi)
    lk = gauss_linking(A, B, ORIGIN, 1.0)
    assert lk.value == k
    assert lk.deviation < 1e-6


def test_linking_is_symmetric_and_reverses_with_orientation():
    A, B = torus_component(3, 0.0), torus_component(3, np.pi)
    ab = gauss_linking(A, B, ORIGIN, 1.0).raw
    ba = gauss_linking(B, A, ORIGIN, 1.0).raw
    rev = gauss_linking(A[::-1], B, ORIGIN, 1.0).raw
    assert ab == pytest.approx(ba, abs=1e-10)
    assert rev == pytest.approx(-ab, abs=1e-10)


def test_split_and_linked_circles_in_r3():
    a = circle3([0, 0, 0], 2)
    far = circle3([5, 0, 0], 2)
    hooked = circle3([1, 0, 0], 1)  # passes through the disc of a once
    assert gauss_linking(a, far).value == 0
    assert abs(gauss_linking(a, hooked).value) == 1


def test_intersecting_curves_rejected():
    a = circle3([0, 0, 0], 2)
    with pytest.raises(SliceError):
        gauss_linking(a, a.copy())


def test_stereographic_maps_sphere_points_to_finite_points(rng):
    pole = np.array([0, 0, 0, 1.0])
    pts = rng.normal(size=(50, 4))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    img = stereographic(pts, ORIGIN, 1.0, pole)
    assert img.shape == (50, 3) and np.all(np.isfinite(img))


@pytest.mark.parametrize("name,n_comp", [("NODE", 2), ("CUSPFIBER", 1), ("PLANE", 1), ("HOPFREF", 2)])
def test_limit_slices(name, n_comp):
    fam = get_preset(name)
    sl = slice_sphere(fam, 0.0, fam.eps_schedule[-1])
    assert len(sl.components) == n_comp
    assert sl.sphere_residual() < 1e-10
    assert sl.embedded()
    for c in sl.components:
        np.testing.assert_array_equal(c.points[0], c.points[-1])


def test_whitney_limit_slice_is_not_embedded():
    fam = get_preset("WHITNEY3D")
    sl = slice_sphere(fam, 0.0, fam.eps_schedule[-1])
    assert not sl.embedded()


def test_slice_csv_header():
    fam = get_preset("PLANE")
    text = slice_sphere(fam, 0.0, 0.1, n_vertices=16).to_csv()
    lines = text.splitlines()
    assert lines[0] == "component,t,x1,x2,x3,x4"
    assert len(lines) == 1 + 17


@pytest.mark.slow
@pytest.mark.parametrize("name", ["PLANE", "NODE", "IMMCUSP", "CUSPFIBER", "HOPFREF"])
def test_limit_slice_invariants(name):
    sl, inv = invariants(name, 0.0)
    assert inv.n == EXPECTED[name].strands
    assert inv.e == EXPECTED[name].e
    assert abs(inv.e_raw - inv.e) < 1e-3


@pytest.mark.slow
@pytest.mark.parametrize("name", ["NODE", "CUSPFIBER"])
def test_self_linking_does_not_depend_on_framing(name):
    fam = get_preset(name)
    es = framing_independence(fam, 0.0, fam.eps_schedule[-1])
    assert len(es) >= 2 and len(set(es)) == 1


@pytest.mark.slow
@pytest.mark.parametrize("name", ["PLANE", "NODE", "CUSPFIBER"])
def test_bennequin_inequalities(name):
    fam = get_preset(name)
    rep = bennequin_check(fam, fam.s_schedule[-1], fam.eps_schedule[-1])
    assert rep.applicable and rep.holds


@pytest.mark.slow
@pytest.mark.parametrize("name", ["NODE", "CUSPFIBER"])
def test_normal_milnor_number_is_minus_self_linking(name):
    rep = normal_linking_check(get_preset(name), EXPECTED[name].muN)
    assert rep.holds
    assert rep.sign == -1
