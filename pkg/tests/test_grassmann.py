from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from milnorlab.diffgeo import join_bivector, split_bivector, wedge
from milnorlab.grassmann import (
    GrassmannPoint,
    bubble_degrees,
    es_residual,
    fiber_degree,
    hodge_star,
    holomorphic_jplus_constant,
    i_action,
    complex_structure_table,
    lift_area_bounds,
    lift_area_check,
    lift_point,
    random_tangent,
)
from milnorlab.germ import eval_jet
from milnorlab.presets import EXPECTED, get_preset

from conftest import complex_chart


def random_plane(seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    return wedge(q[:, 0], q[:, 1]), rng


@lru_cache(maxsize=None)
def degrees(name):
    return bubble_degrees(get_preset(name))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_split_of_unit_simple_bivector(seed):
    P, _ = random_plane(seed)
    J, K = split_bivector(P)
    np.testing.assert_allclose([np.linalg.norm(J), np.linalg.norm(K)], 1, atol=1e-12)
    np.testing.assert_allclose(join_bivector(J, K), P, atol=1e-12)
    # self-dual and anti-self-dual parts
    g = GrassmannPoint(J, K)
    plus, minus = (P + hodge_star(P)) / 2, (P - hodge_star(P)) / 2
    np.testing.assert_allclose(np.linalg.norm(plus), np.linalg.norm(minus), atol=1e-12)
    np.testing.assert_allclose(g.bivector, P, atol=1e-12)


def test_non_unit_point_rejected():
    with pytest.raises(ValueError):
        GrassmannPoint(np.array([2.0, 0, 0]), np.array([1.0, 0, 0]))


def test_complex_structure_on_standard_basis():
    for name, (got, want) in complex_structure_table().items():
        np.testing.assert_allclose(got, want, atol=1e-14, err_msg=name)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_complex_structure_squares_to_minus_one(seed):
    P, rng = random_plane(seed)
    V = random_tangent(P, rng)
    IV = i_action(P, V)
    np.testing.assert_allclose(i_action(P, IV), -V, atol=1e-10)
    assert np.linalg.norm(IV) == pytest.approx(np.linalg.norm(V), rel=1e-10)
    assert abs(IV @ V) < 1e-10 * (V @ V)


def test_non_tangent_vector_rejected():
    P = wedge(np.eye(4)[0], np.eye(4)[1])
    with pytest.raises(ValueError):
        i_action(P, P)


@pytest.mark.parametrize("which", ["plus", "minus"])
def test_fiber_spheres_have_degree_one(which):
    assert fiber_degree(which) == pytest.approx(1.0, abs=1e-10)


def test_lift_of_complex_line_is_constant_in_first_factor(rng):
    chart = complex_chart("c", "z^2", "z^3 + z")
    pts = 0.8 * rng.random(30) * np.exp(2j * np.pi * rng.random(30)) + 0.05
    assert holomorphic_jplus_constant(chart, pts, 0.0) < 1e-12
    g = lift_point(eval_jet(chart, pts, 0.0))
    assert np.ptp(g.Kminus, axis=0).max() > 0.1


@pytest.mark.parametrize("name", ["NODE", "IMMCUSP", "CUSPFIBER", "HOPFREF"])
def test_eells_salamon_holds_for_complex_curves(name):
    fam = get_preset(name)
    z = np.array([0.3 + 0.1j, -0.2 + 0.25j, 0.15 - 0.35j])
    assert np.max(es_residual(fam, fam.s_schedule[0], z)) < 1e-10


def test_eells_salamon_fails_for_non_minimal_graph():
    fam = get_preset("WHITNEY3D")
    z = np.array([0.3 + 0.1j, -0.2 + 0.25j])
    assert np.min(es_residual(fam, fam.s_schedule[0], z)) > 1e-2


def test_flat_lift_area_equals_area():
    rep = lift_area_check(get_preset("PLANE"), 1e-2, 0.2)
    assert rep.lift_area == pytest.approx(np.pi * 0.04, rel=1e-10)
    assert rep.flat and rep.holds()


@pytest.mark.slow
@pytest.mark.parametrize("name", ["NODE", "IMMCUSP", "CUSPFIBER", "WHITNEY3D"])
def test_lift_area_bounded_along_schedule(name):
    reports, c3 = lift_area_bounds(get_preset(name))
    assert all(r.holds() for r in reports)
    assert all(r.lift_area >= r.area for r in reports)
    assert max(r.lift_area for r in reports) <= 1.1 * min(r.lift_area for r in reports)
    assert c3 == max(r.lift_area for r in reports)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["PLANE", "NODE", "IMMCUSP", "CUSPFIBER", "WHITNEY3D", "HOPFREF"])
def test_bubble_degrees(name):
    d = degrees(name)
    exp = EXPECTED[name]
    assert (d.a, d.b) == (exp.a, exp.b)
    assert d.consistent_with(exp.muT, exp.muN)
