import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import NUMEROV_A, NUMEROV_B, FOUR_STEP_A, FOUR_STEP_B, SUITE
from efms.ef_fitting import classical_limit
from efms.errors import (
    InconsistencyError,
    InvalidMethodError,
    OrderUndeterminedError,
    ShapeError,
    SpecParseError,
)
from efms.method_core import (
    CoefficientSet,
    MethodSpec,
    apply_functional,
    bundled_spec_names,
    error_constant_sequence,
    load_method_spec,
    order_and_error_constant,
    parse_method_spec,
    to_centered,
    to_standard,
    validate,
    validate_standard,
)

NUMEROV = CoefficientSet(2, 0.0, NUMEROV_A, NUMEROV_B)
SIMOS = CoefficientSet(4, 0.0, FOUR_STEP_A, FOUR_STEP_B)


def test_to_standard_examples():
    alpha, beta = to_standard(SIMOS)
    assert alpha == [1, -1, 0, -1, 1]
    assert beta == [Fraction(17, 240), Fraction(29, 30), Fraction(37, 40), Fraction(29, 30), Fraction(17, 240)]
    alpha, beta = to_standard(NUMEROV)
    assert alpha == [1, -2, 1]
    assert beta == [Fraction(1, 12), Fraction(5, 6), Fraction(1, 12)]


coef = st.floats(-10, 10, allow_nan=False)


@given(st.sampled_from([2, 4, 6, 8]), st.data())
def test_centered_round_trip(J, data):
    m = J // 2
    a = tuple(data.draw(st.lists(coef, min_size=m, max_size=m))) + (1.0,)
    b = tuple(data.draw(st.lists(coef, min_size=m + 1, max_size=m + 1)))
    cs = CoefficientSet(J, 0.25, a, b)
    alpha, beta = to_standard(cs)
    assert alpha == alpha[::-1] and beta == beta[::-1]
    assert to_centered(alpha, beta, theta=0.25) == cs


def test_to_centered_rejects_asymmetric():
    with pytest.raises(InvalidMethodError):
        to_centered([1, -2, 1.1], [0.1, 0.8, 0.1])


def test_validate_numerov():
    rep = validate_standard([1, -2, 1], [1 / 12, 5 / 6, 1 / 12])
    assert rep.ok, rep.messages


def test_validate_inconsistent():
    rep = validate_standard([1, -2.1, 1], [1 / 12, 5 / 6, 1 / 12])
    assert not rep.consistent


def test_validate_double_root_at_minus_one():
    # rho = (z^2 - 1)^2
    rep = validate_standard([1, 0, -2, 0, 1], [0.1, 0.2, 0.4, 0.2, 0.1])
    assert not rep.zero_stable


def test_validate_root_outside():
    # rho = (z - 1)^2 (z^2 + 2.5 z + 1): roots -2, -0.5
    rep = validate_standard([1, 0.5, -3, 0.5, 1], [0.5, 1, 1.5, 1, 0.5])
    assert rep.consistent
    assert not rep.zero_stable


def test_validate_rejects_zero_method():
    with pytest.raises(InvalidMethodError):
        validate(CoefficientSet(2, 0.0, (0.0, 0.0), (0.0, 0.0)))


@pytest.mark.parametrize("name", SUITE)
def test_suite_classical_limits_validate(name):
    rep = validate(classical_limit(load_method_spec(name)))
    assert rep.ok, rep.messages


def test_order_numerov_exact():
    rep = order_and_error_constant(NUMEROV)
    assert rep.p == 4
    assert rep.error_constant == Fraction(-1, 240)


def test_order_four_step_exact():
    rep = order_and_error_constant(SIMOS)
    assert rep.p == 6
    assert rep.error_constant == Fraction(-53, 20160)


@pytest.mark.parametrize("cs", [NUMEROV, SIMOS])
def test_odd_moments_vanish_exactly(cs):
    seq = error_constant_sequence(cs, 14)
    assert all(seq[q] == 0 for q in range(1, 15, 2))


@pytest.mark.parametrize("cs", [NUMEROV, SIMOS])
def test_order_invariant_under_expansion_point(cs):
    c = order_and_error_constant(cs)
    left = order_and_error_constant(cs, about="left")
    assert (c.p, c.error_constant) == (left.p, left.error_constant)


def test_inconsistent_method_raises():
    cs = CoefficientSet(2, 0.0, (-2.1, 1.0), (5 / 6, 1 / 12))
    with pytest.raises(InconsistencyError):
        order_and_error_constant(cs)


def test_order_undetermined():
    with pytest.raises(OrderUndeterminedError):
        order_and_error_constant(NUMEROV.to_float(), zero_threshold=1.0)


def test_apply_functional_constant():
    for cs in (NUMEROV, SIMOS):
        assert apply_functional(cs, lambda x: 1, lambda x: 0, 0.3, 0.7) == 0


@settings(max_examples=50)
@given(st.floats(-5, 5), st.floats(1e-3, 2))
def test_apply_functional_x2_numerov(x, h):
    cs = NUMEROV.to_float()
    v = apply_functional(cs, lambda t: t * t, lambda t: 2.0, x, h)
    assert abs(v) <= 1e-12 * max(1.0, (abs(x) + 2 * h) ** 2)


def test_apply_functional_x6_numerov():
    assert apply_functional(NUMEROV, lambda t: Fraction(t) ** 6, lambda t: 30 * Fraction(t) ** 4, 0, 1) == -3


@pytest.mark.parametrize("name", SUITE)
def test_monomial_moments(name):
    cs = classical_limit(load_method_spec(name), exact=True)
    rep = order_and_error_constant(cs)
    p = rep.p
    for m in range(p + 3):
        v = apply_functional(cs, lambda t: Fraction(t) ** m,
                             lambda t: m * (m - 1) * Fraction(t) ** (m - 2) if m >= 2 else 0, 0, 1)
        if m <= p + 1:
            assert v == 0
        else:
            assert v == math.factorial(p + 2) * rep.error_constant


def test_spec_validation():
    with pytest.raises(InvalidMethodError):
        MethodSpec(J=3, K=1, P=0)
    with pytest.raises(InvalidMethodError):
        MethodSpec(J=2, K=-1, P=-1)
    with pytest.raises(InvalidMethodError):
        MethodSpec(J=2, K=2, P=0)
    with pytest.raises(InvalidMethodError):
        MethodSpec(J=2, K=3, P=0, frozen={"a1": 2.0})
    with pytest.raises(ShapeError):
        MethodSpec(J=2, K=5, P=0)


def test_four_step_double_freeze_is_not_square():
    with pytest.raises(ShapeError, match="4"):
        MethodSpec(J=4, K=-1, P=3, frozen={"a0": 0.0, "a1": -1.0})


def test_spec_counting():
    spec = MethodSpec(J=2, K=3, P=0)
    assert spec.condition_labels == ["1", "x^2", "cos"]
    assert spec.unknowns == ["a0", "b0", "b1"]
    assert spec.order == 4
    spec = MethodSpec(J=2, K=1, P=1)
    assert spec.condition_labels == ["1", "cos", "x·sin"]


def test_parse_errors():
    with pytest.raises(SpecParseError):
        parse_method_spec("J = \n")
    with pytest.raises(SpecParseError):
        parse_method_spec("J = 2\nK = 3\n")
    with pytest.raises(SpecParseError):
        parse_method_spec("J = 2\nK = 3\nP = 0\ncolour = 'red'\n")


def test_load_spec(tmp_path):
    path = tmp_path / "m.toml"
    path.write_text('J = 4\nK = 7\nP = -1\nlabel = "x"\nfrozen = { a0 = 0.0 }\n')
    spec = load_method_spec(path)
    assert spec.frozen_map == {"a0": 0.0}
    assert spec.order == 6
    with pytest.raises(FileNotFoundError):
        load_method_spec(tmp_path / "missing.toml")
    assert set(SUITE) <= set(bundled_spec_names())


def test_coefficient_json_round_trip():
    cs = classical_limit(load_method_spec("simos_case2_classical"))
    back = CoefficientSet.from_json(cs.to_json())
    assert back == cs
    assert set(json.loads(cs.to_json())) == {"J", "theta", "a", "b"}
