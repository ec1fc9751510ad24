from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from milnorlab.germ import Branch, SurfaceFamily
from milnorlab.milnor import (
    LimitSchedule,
    MinimalityError,
    classical_milnor,
    euler_limit_check,
    eps_monotonicity,
    milnor_estimate,
    minimal_milnor,
    richardson,
    snap_integer,
    superminimality_defect,
    milnor_inequality_check,
    trace_defect,
)
from milnorlab.presets import EXPECTED, get_preset, preset_names

from conftest import complex_chart


@lru_cache(maxsize=None)
def estimate(name):
    return milnor_estimate(get_preset(name))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.integers(0, 2))
def test_richardson_is_exact_on_polynomials(coeffs, order):
    eps = np.array([0.2, 0.1, 0.05])
    c = np.array(coeffs[: order + 1])
    values = np.polyval(c[::-1], eps)
    assert richardson(eps, values, order) == pytest.approx(c[0], abs=1e-9)


def test_richardson_order_zero_takes_last_value():
    assert richardson([0.2, 0.1], [3.0, 2.5], 0) == 2.5


@pytest.mark.parametrize("x,expected", [(2.04, 2), (-2.96, -3), (1.5, None), (0.11, None), (-0.05, 0)])
def test_snap_integer(x, expected):
    assert snap_integer(x, 0.1) == expected


@pytest.mark.parametrize("kw", [
    dict(eps=(0.1, 0.2), s=((1e-3,), (1e-3,))),
    dict(eps=(0.2,), s=((1e-3, 1e-2),)),
    dict(eps=(0.2,), s=((1e-3,), (1e-4,))),
    dict(eps=(0.2,), s=((-1e-3,),)),
    dict(eps=(0.2,), s=((1e-3,),), theta_s=0),
])
def test_schedule_validation(kw):
    with pytest.raises(ValueError):
        LimitSchedule(**kw)


def test_schedule_from_family():
    fam = get_preset("NODE")
    sch = LimitSchedule.for_family(fam)
    assert sch.eps == fam.eps_schedule
    assert all(row == fam.s_schedule for row in sch.s)


def test_trace_defect_separates_minimal_from_non_minimal():
    assert trace_defect(get_preset("IMMCUSP"), 1e-3) < 1e-10
    assert trace_defect(get_preset("WHITNEY3D"), 1e-3) > 1e-2


def test_superminimality_of_complex_curves():
    assert superminimality_defect(get_preset("CUSPFIBER"), 1e-4) < 1e-9
    assert superminimality_defect(get_preset("NODE"), 1e-4) < 1e-9
    assert superminimality_defect(get_preset("WHITNEY3D"), 1e-3) > 1e-2


def test_minimal_path_refuses_unflagged_family():
    with pytest.raises(MinimalityError):
        minimal_milnor(get_preset("WHITNEY3D"))


def test_minimal_path_refuses_flag_without_minimality():
    chart = complex_chart("g", "z", "z^2 + s*zb^2")
    fam = SurfaceFamily("fake", (chart,), (Branch(1, 1),), flags=("minimal",),
                        s_schedule=(1e-1,), eps_schedule=(0.2,))
    with pytest.raises(MinimalityError):
        minimal_milnor(fam)


@pytest.mark.slow
@pytest.mark.parametrize("name", preset_names())
def test_preset_milnor_numbers(name):
    est = estimate(name)
    exp = EXPECTED[name]
    assert est.snapped, est.notes
    assert (est.muT, est.muN) == (exp.muT, exp.muN)
    assert abs(est.muT_raw - exp.muT) < 0.05
    assert abs(est.muN_raw - exp.muN) < 0.05
    assert all(est.stabilized.values())
    assert eps_monotonicity(est)
    assert milnor_inequality_check(get_preset(name), est)["holds"]


@pytest.mark.slow
@pytest.mark.parametrize("name", ["NODE", "IMMCUSP", "CUSPFIBER"])
def test_quadratic_integrands_agree_for_complex_curves(name):
    (t_raw, n_raw), (t, n) = minimal_milnor(get_preset(name))
    est = estimate(name)
    assert (t, n) == (est.muT, est.muN)
    assert abs(t_raw - est.muT_raw) < 0.05 and abs(n_raw - est.muN_raw) < 0.05


@pytest.mark.slow
@pytest.mark.parametrize("name", preset_names())
def test_euler_characteristic_matches(name):
    chk = euler_limit_check(get_preset(name), estimate=estimate(name))
    assert chk.chi == EXPECTED[name].chi
    assert chk.holds


@pytest.mark.slow
def test_classical_milnor_number_of_cusp():
    # y^2 = x^3 has Milnor number 2; the cusp branch contributes N - 1 = 1
    assert classical_milnor(get_preset("CUSPFIBER"), estimate("CUSPFIBER")) == 2
    assert classical_milnor(get_preset("NODE"), estimate("NODE")) is None


@pytest.mark.slow
def test_table_csv_columns():
    text = estimate("PLANE").table_csv()
    assert text.splitlines()[0] == "eps,s,lT,lT_err,lN,lN_err"
    assert len(text.splitlines()) == 1 + 9
