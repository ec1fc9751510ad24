import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from milnorlab.expr import (
    ExprSemanticError,
    ExprSyntaxError,
    diff,
    expand,
    parse_expr,
    to_text,
)
from milnorlab.germ import _DX, _DY


def evaluate(text, z, s=0.3):
    return expand(parse_expr(text))(z=np.asarray(z, dtype=complex), zb=np.conj(z), s=s)


def test_polynomial_values():
    z = 0.3 - 0.7j
    assert np.isclose(evaluate("z^3 + s*z", z), z ** 3 + 0.3 * z)
    assert np.isclose(evaluate("re(z^2)", z), (z * z).real)
    assert np.isclose(evaluate("im(z)*zb", z), z.imag * np.conj(z))
    assert np.isclose(evaluate("(z - s/z)/2", z), (z - 0.3 / z) / 2)
    assert np.isclose(evaluate("-i*z", z), -1j * z)


def test_precedence_and_unary_minus():
    z = 1.5 + 0.5j
    assert np.isclose(evaluate("-z^2", z), -(z ** 2))
    assert np.isclose(evaluate("2*z^2 - 3/4", z), 2 * z ** 2 - 0.75)
    assert np.isclose(evaluate("1 - 2 - 3", z), -4)


def test_unbalanced_parenthesis():
    with pytest.raises(ExprSyntaxError) as exc:
        parse_expr("(z^2, z^3 + s*z")
    assert exc.value.expected is not None


def test_missing_close_paren_message():
    with pytest.raises(ExprSyntaxError, match=r"expected '\)'"):
        parse_expr("re(z^2")


@pytest.mark.parametrize("text", ["z^-1", "w + z", "z^(1/2)"])
def test_semantic_errors(text):
    with pytest.raises((ExprSemanticError, ExprSyntaxError)):
        parse_expr(text)


def test_non_monomial_division_rejected():
    with pytest.raises(ExprSemanticError):
        parse_expr("1/(1 + z)")


def test_derivatives_of_z_squared():
    e = parse_expr("z^2")
    ex, ey = diff(e, _DX), diff(e, _DY)
    z = 0.4 + 0.2j
    ev = lambda t: expand(t)(z=z, zb=np.conj(z), s=0)  # noqa: E731
    assert np.isclose(ev(ex), 2 * z)
    assert np.isclose(ev(ey), 2j * z)
    assert np.isclose(ev(diff(ex, _DY)), ev(diff(ey, _DX)))


exprs = st.sampled_from([
    "z^2", "z^3 + s*z", "re(z^3) + s*re(z)", "im(z^2)*re(z)", "z*zb", "(z - s/z)/2",
    "re(z)^2 - im(z)^3", "i*z^4 - 2*zb^2", "s^2*z + 3/5",
])
points = st.complex_numbers(min_magnitude=0.2, max_magnitude=1.0, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(exprs, points)
def test_symbolic_derivative_matches_central_difference(text, z):
    e = parse_expr(text)
    poly = expand(e)
    dx, dy = expand(diff(e, _DX)), expand(diff(e, _DY))
    f = lambda w: poly(z=w, zb=np.conj(w), s=0.3)  # noqa: E731
    errs = []
    for h in (1e-4, 1e-5):
        fdx = (f(z + h) - f(z - h)) / (2 * h)
        fdy = (f(z + 1j * h) - f(z - 1j * h)) / (2 * h)
        sx = dx(z=z, zb=np.conj(z), s=0.3)
        sy = dy(z=z, zb=np.conj(z), s=0.3)
        errs.append(max(abs(fdx - sx), abs(fdy - sy)))
        assert errs[-1] < 1e-6 * max(1.0, abs(sx), abs(sy))
    # second-order behaviour: the smaller step is not worse (up to rounding)
    assert errs[1] <= errs[0] + 1e-9


@settings(max_examples=40, deadline=None)
@given(exprs)
def test_print_parse_roundtrip(text):
    e = parse_expr(text)
    assert parse_expr(to_text(e)) == e
