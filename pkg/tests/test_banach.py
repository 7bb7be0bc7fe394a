import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ergomix import banach
from ergomix.banach import coeff_seq, distance, format_id, grid_function, linear_combine, norm, parse_id
from ergomix.errors import ConfigurationError, QuadratureError

GRID = np.linspace(-1.0, 1.0, 201)
finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_ylin_norm_of_identity_on_unit_interval():
    # sup |x| / (1 + |x|) over [-1, 1] is attained at the ends
    g = grid_function(GRID, GRID, "ylin")
    assert norm(g) == pytest.approx(0.5, abs=1e-15)


def test_l1_norm_of_alternating_powers():
    x = coeff_seq([1, 0, -0.25, 0, 1 / 16], "lp(p=1.0)")
    assert norm(x) == pytest.approx(21 / 16, rel=1e-15)


@pytest.mark.parametrize("p,expected", [(1.0, 7.0), (2.0, 5.0), (3.0, (27 + 64) ** (1 / 3))])
def test_lp_norms(p, expected):
    assert norm(coeff_seq([3.0, -4.0], format_id("lp", p=p))) == pytest.approx(expected)


def test_weighted_l1_of_exponential():
    g = np.linspace(0, 60, 60001)
    x = grid_function(g, np.exp(g / 2), "weighted-l1(w=1.0)")
    # trapezoid of exp(-x/2): 2 (1 - e^-30) plus the Euler-Maclaurin term h^2/12 (f'(60) - f'(0))
    h = 1e-3
    expected = 2 * (1 - math.exp(-30)) + h * h / 12 * 0.5 * (1 - math.exp(-30))
    assert norm(x) == pytest.approx(expected, rel=1e-11)


def test_yst_norm_rejects_nonpositive_grid():
    with pytest.raises(ConfigurationError):
        norm(grid_function(GRID, GRID, "yst(s=2.0,tau=0.0)"))


@pytest.mark.parametrize("spec", ["lp(p=1.0)", "weighted-l1(w=2.5)", "ylin", "yst(s=2.0,tau=0.5)"])
def test_id_round_trip(spec):
    name, kw = parse_id(spec)
    assert format_id(name, **kw) == spec


@given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3))
def test_coeff_triangle_and_symmetry(a, b):
    x, y = coeff_seq(a, "lp(p=2.0)"), coeff_seq(b, "lp(p=2.0)")
    s = linear_combine([1.0, 1.0], [x, y])
    assert norm(s) <= norm(x) + norm(y) + 1e-9 * (1 + norm(x) + norm(y))
    assert distance(x, y) == pytest.approx(distance(y, x))


@given(st.lists(finite, min_size=4, max_size=4), st.floats(-5, 5))
def test_eigen_clock_matches_coefficients(c, t):
    params = np.array([0.1j, 0.2j, 0.3j, 0.4j])
    x = banach.eigen_combo(params, c, 1j * np.arange(1, 5), "birth_death(a=0.0,b=0.25,d=1.0,dim=40)",
                           "lp(p=1.0)", clock=t)
    np.testing.assert_allclose(x.coefficients(), np.asarray(c) * np.exp(1j * t * np.arange(1, 5)))


def test_eigen_terms_merge():
    basis, nid = "birth_death(a=0.0,b=0.25,d=1.0,dim=40)", "lp(p=1.0)"
    x = banach.eigen_combo([0.1j, 0.2j], [1.0, 2.0], [0.1j, 0.2j], basis, nid)
    y = banach.eigen_combo([0.2j, 0.3j], [-2.0, 1.0], [0.2j, 0.3j], basis, nid)
    z = linear_combine([1.0, 1.0], [x, y])
    assert z.params.size == 3
    np.testing.assert_allclose(z.values, [1.0, 0.0, 1.0])


@pytest.mark.parametrize("x", [
    coeff_seq([1 + 2j, -3.0], "lp(p=1.0)"),
    grid_function(GRID, np.sin(GRID), "ylin"),
    banach.eigen_combo([0.1j], [2.0], [0.1j], "fourier(W=20.0,h=0.5)", "ylin", clock=1.5),
])
def test_json_round_trip(x):
    import jsonschema
    from ergomix.cli import load_schema

    obj = x.to_json()
    jsonschema.validate(obj, load_schema("state_vector.v1"))
    y = banach.StateVector.from_json(obj)
    assert y.kind == x.kind and y.norm_id == x.norm_id
    assert distance(x, y) == 0.0


def test_quadrature_of_vector_valued_hat():
    # int_0^2 hat(t) v dt = v, hat with peak 1 at t = 1
    v = grid_function(GRID, np.cos(GRID), "ylin")
    hat = lambda t: 1.0 - abs(t - 1.0)
    out = banach.quad_integral(lambda t: v.with_values(hat(t) * v.values), (0.0, 2.0), 1e-12,
                               breakpoints=[1.0])
    assert distance(out, v) < 1e-14


def test_quadrature_exact_for_low_degree_polynomial():
    c = coeff_seq([1.0, 1.0], "lp(p=1.0)")
    out = banach.quad_integral(lambda t: c.with_values([t ** 5, t ** 9]), (0.0, 1.0), 1e-12)
    np.testing.assert_allclose(out.values, [1 / 6, 1 / 10], rtol=1e-13)


def test_quadrature_reports_last_estimates():
    c = coeff_seq([1.0], "lp(p=1.0)")
    with pytest.raises(QuadratureError) as info:
        banach.quad_integral(lambda t: c.with_values([math.sin(1e4 * t)]), (0.0, 1.0), 1e-14,
                             max_level=2)
    assert info.value.previous is not None and info.value.current is not None


def test_quadrature_rejects_reversed_interval():
    with pytest.raises(ConfigurationError):
        banach.quad_integral(lambda t: coeff_seq([t], "lp(p=1.0)"), (1.0, 0.0))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=6))
def test_clock_norms_match_single_norms(shifts):
    basis = format_id("fourier", W=20.0, h=0.05)
    x = banach.eigen_combo([0.5j, 1.0j, 1.5j], [1.0, -0.5, 0.25j], [0.5j, 1.0j, 1.5j], basis, "ylin")
    batch = banach.clock_norms(x, shifts)
    single = [norm(x.with_values(x.values, clock=x.clock + s)) for s in shifts]
    np.testing.assert_allclose(batch, single, rtol=1e-12, atol=1e-15)
