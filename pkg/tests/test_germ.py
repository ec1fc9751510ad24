import numpy as np
import pytest

from milnorlab.expr import IMPLICIT_VARS, parse_expr
from milnorlab.germ import (
    Branch,
    BranchError,
    ChartError,
    ImplicitChart,
    SurfaceFamily,
    ValidationError,
    branch_data,
    eval_jet,
    implicit_sheet_jet,
    validate_family,
)
from milnorlab.presets import get_preset, preset_names

from conftest import complex_chart


def test_plane_jet_is_affine():
    jet = eval_jet(complex_chart("p", "z", "0"), 0j, 0.5)
    np.testing.assert_array_equal(jet.fx, [1, 0, 0, 0])
    np.testing.assert_array_equal(jet.fy, [0, 1, 0, 0])
    for d in (jet.fxx, jet.fxy, jet.fyy):
        np.testing.assert_array_equal(d, 0)


def test_parabola_second_derivatives(parabola):
    jet = eval_jet(parabola, 0j, 0.0)
    np.testing.assert_allclose(jet.fxx, [0, 0, 2, 0])
    np.testing.assert_allclose(jet.fxy, [0, 0, 0, 2])
    np.testing.assert_allclose(jet.fyy, [0, 0, -2, 0])


def test_cusp_jet_against_finite_differences(cusp):
    z, h = 0.1 + 0.0j, 1e-5
    jet = eval_jet(cusp, z, 0.0)
    f = lambda w: cusp.position(w, 0.0)  # noqa: E731
    fx = (f(z + h) - f(z - h)) / (2 * h)
    fy = (f(z + 1j * h) - f(z - 1j * h)) / (2 * h)
    assert np.max(np.abs(fx - jet.fx)) < 1e-6 * np.max(np.abs(jet.fx))
    assert np.max(np.abs(fy - jet.fy)) < 1e-6 * np.max(np.abs(jet.fy))


def test_outside_domain_rejected(parabola):
    with pytest.raises(ChartError):
        eval_jet(parabola, 2.0 + 0j, 0.0)


def _quadric():
    return ImplicitChart("q", parse_expr("y^2 - x^2 - s", IMPLICIT_VARS), base_radius=2.0)


def test_quadric_sheet_values():
    jet = implicit_sheet_jet(_quadric(), 1.0 + 0j, 0, 0.01)
    y = np.sqrt(1.01)
    np.testing.assert_allclose(jet.f, [1, 0, y, 0], atol=1e-14)
    # dy/dx = x / y, embedded through C^2 = R^4
    np.testing.assert_allclose(jet.fx, [1, 0, 1 / y, 0], atol=1e-14)


def test_cusp_sheets_are_opposite():
    chart = ImplicitChart("c", parse_expr("y^2 - x^3 - s", IMPLICIT_VARS), base_radius=1.0)
    y0 = implicit_sheet_jet(chart, 0.5 + 0j, 0, 1e-3).f[2:]
    y1 = implicit_sheet_jet(chart, 0.5 + 0j, 1, 1e-3).f[2:]
    np.testing.assert_allclose(y0, -y1, atol=1e-14)


def test_implicit_residual_and_finite_differences():
    chart = ImplicitChart("c", parse_expr("y^2 - x^3 - s", IMPLICIT_VARS), base_radius=1.0)
    b = np.array([0.3 + 0.2j, -0.4 + 0.1j])
    w = chart.fiber_roots(b, 1e-3)
    assert np.max(np.abs(chart.residual(b[:, None], w, 1e-3))) < 1e-12
    h = 1e-5
    for sheet in (0, 1):
        jet = implicit_sheet_jet(chart, b[0], sheet, 1e-3)
        plus = implicit_sheet_jet(chart, b[0] + h, sheet, 1e-3).f
        minus = implicit_sheet_jet(chart, b[0] - h, sheet, 1e-3).f
        assert np.max(np.abs((plus - minus) / (2 * h) - jet.fx)) < 1e-6


@pytest.mark.parametrize("c1,c2,N", [("z^2", "z^3", 2), ("z", "z^2", 1), ("z^3", "z^5 + z^7", 3)])
def test_branch_order(c1, c2, N):
    bd = branch_data(complex_chart("b", c1, c2))
    assert bd.branches[0].N == N
    assert bd.branches[0].m == N - 1


def test_branch_data_rejects_degenerate_leading_term():
    with pytest.raises(BranchError):
        branch_data(complex_chart("bad", "re(z)^2", "im(z)^2"))


def test_node_branches_and_strand_total():
    fam = get_preset("NODE")
    assert fam.branch_data.strand_total == 2
    assert [b.N for b in fam.branches] == [1, 1]


@pytest.mark.parametrize("name", preset_names())
def test_presets_validate(name):
    validate_family(get_preset(name))


def test_validation_catches_wrong_branch_declaration():
    fam = get_preset("IMMCUSP")
    bad = SurfaceFamily(fam.name, fam.charts, (Branch(1, 1),), fam.p, fam.s_schedule, fam.eps_schedule)
    with pytest.raises(ValidationError):
        validate_family(bad)


def test_validation_catches_rank_drop():
    chart = complex_chart("flat", "re(z)", "re(z)^2 + s*re(z)")  # real image: rank one
    fam = SurfaceFamily("x", (chart,), (Branch(1, 1),))
    with pytest.raises(ValidationError):
        validate_family(fam)
