import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from milnorlab.dsl import (
    DslSemanticError,
    DslSyntaxError,
    DslValidationError,
    parse_family,
    print_family,
)
from milnorlab.presets import PRESET_TEXT, get_preset, preset_names

CUSP_DOC = '''
[family]
name = "cusp-family"
flags = holomorphic, minimal
s_schedule = 1e-3, 2.5e-4

[chart "disc"]
domain = disc(1)
map_c = (z^2, z^3 + s*z)

[branch]
branches = (N=2, s=1)
'''


def test_parse_complex_map():
    fam = parse_family(CUSP_DOC)
    assert fam.name == "cusp-family"
    assert fam.has("holomorphic") and fam.has("minimal") and not fam.has("embedded")
    chart = fam.charts[0]
    z = 0.3 + 0.1j
    np.testing.assert_allclose(
        chart.position(z, 1e-3),
        [(z ** 2).real, (z ** 2).imag, (z ** 3 + 1e-3 * z).real, (z ** 3 + 1e-3 * z).imag],
        atol=1e-15,
    )
    assert [b.N for b in fam.branches] == [2]


def test_real_map_matches_complex_map():
    real = CUSP_DOC.replace("map_c = (z^2, z^3 + s*z)",
                            "map_r = (re(z^2), im(z^2), re(z^3 + s*z), im(z^3 + s*z))")
    a, b = parse_family(CUSP_DOC).charts[0], parse_family(real).charts[0]
    z = np.exp(1j * np.linspace(0, 6, 11)) * 0.7
    np.testing.assert_allclose(a.position(z, 2e-4), b.position(z, 2e-4), atol=1e-15)


def test_syntax_error_location():
    doc = CUSP_DOC.replace("map_c = (z^2, z^3 + s*z)", "map_c = (z^2, (z^3 + s*z)")
    with pytest.raises(DslSyntaxError) as exc:
        parse_family(doc)
    err = exc.value
    assert err.line == doc.splitlines().index("map_c = (z^2, (z^3 + s*z)") + 1
    assert err.col > 1
    assert "expected ')'" in str(err)


def test_missing_branch_section():
    doc = CUSP_DOC.split("[branch]")[0]
    with pytest.raises(DslSemanticError, match="branch"):
        parse_family(doc)


def test_duplicate_chart_label():
    doc = CUSP_DOC.replace("[branch]", '[chart "disc"]\ndomain = disc(1)\nmap_c = (z, 0)\n\n[branch]')
    with pytest.raises(DslSemanticError, match="duplicate"):
        parse_family(doc)


def test_unknown_flag_rejected():
    with pytest.raises(DslSemanticError):
        parse_family(CUSP_DOC.replace("holomorphic, minimal", "holomorphic, shiny"))


def test_wrong_branch_order_fails_validation():
    with pytest.raises(DslValidationError):
        parse_family(CUSP_DOC.replace("(N=2, s=1)", "(N=3, s=1)"))


def test_comments_and_blank_lines_are_ignored():
    doc = "\n# leading comment\n" + CUSP_DOC.replace("domain = disc(1)", "domain = disc(1)   # unit disc")
    assert parse_family(doc) == parse_family(CUSP_DOC)


@pytest.mark.parametrize("name", preset_names())
def test_preset_roundtrip(name):
    fam = get_preset(name)
    text = print_family(fam)
    assert parse_family(text) == fam
    assert print_family(parse_family(text)) == text


@pytest.mark.parametrize("name", preset_names())
def test_preset_text_parses(name):
    assert parse_family(PRESET_TEXT[name]).name == name


@settings(max_examples=25, deadline=None)
@given(
    st.integers(2, 4),
    st.floats(0.1, 3.0),
    st.lists(st.floats(1e-5, 1e-2), min_size=1, max_size=4, unique=True).map(lambda v: sorted(v, reverse=True)),
)
def test_generated_documents_roundtrip(N, coef, sched):
    doc = f'''
[family]
name = "gen"
s_schedule = {", ".join(repr(x) for x in sched)}

[chart "c"]
domain = disc(1)
map_c = (z^{N}, {coef!r}*z^{N + 1} + s*z)

[branch]
branches = (N={N}, s=1)
'''
    fam = parse_family(doc)
    assert fam.s_schedule == tuple(sched)
    assert parse_family(print_family(fam)) == fam
