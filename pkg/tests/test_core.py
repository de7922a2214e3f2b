import random
from decimal import Decimal, getcontext
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from truthlab.core import (
    INF,
    ONE,
    PHI,
    SQRT5,
    ZERO,
    BudgetExceeded,
    Distribution,
    Scalar,
    TypeDomain,
    budget,
    check_budget,
    expectation,
    parse_scalar,
    smin,
)

getcontext().prec = 80
ROOT5 = Decimal(5).sqrt()

fractions = st.fractions(min_value=-50, max_value=50, max_denominator=40)
scalars = st.builds(Scalar, fractions, fractions)


def approx(x: Scalar) -> Decimal:
    # independent high-precision evaluation, used only as an oracle for the sign
    return Decimal(x.a.numerator) / Decimal(x.a.denominator) + Decimal(x.b.numerator) / Decimal(x.b.denominator) * ROOT5


def test_golden_ratio_square():
    assert PHI * PHI == (3 + SQRT5) / 2
    assert PHI * PHI == PHI + 1


def test_one_plus_phi_beats_phi_squared_minus_eps():
    assert 1 + PHI > PHI * PHI - Fraction(1, 100)


def test_infinity_dominates():
    assert INF > 4 / Scalar(Fraction(1, 100))
    assert INF > Scalar(10**9, 10**9)
    assert INF == INF
    assert INF + 3 == INF
    assert INF * 2 == INF


@pytest.mark.parametrize(
    "op",
    [lambda: INF - INF, lambda: INF * 0, lambda: 3 - INF, lambda: ONE / INF, lambda: ONE / ZERO],
)
def test_undefined_operations_raise(op):
    with pytest.raises((ArithmeticError, ZeroDivisionError)):
        op()


@given(scalars, scalars)
def test_compare_matches_decimal_sign(x, y):
    d = approx(x) - approx(y)
    if x == y:
        assert d == 0
    elif x < y:
        assert d < 0
    else:
        assert d > 0
    assert (x - y).sign() == (0 if x == y else (1 if x > y else -1))


def test_field_laws_on_random_triples():
    rng = random.Random(7)

    def draw():
        return Scalar(Fraction(rng.randint(-20, 20), rng.randint(1, 9)), Fraction(rng.randint(-20, 20), rng.randint(1, 9)))

    for _ in range(10_000):
        x, y, z = draw(), draw(), draw()
        assert (x + y) + z == x + (y + z)
        assert x * y == y * x
        assert (x * y) * z == x * (y * z)
        assert x * (y + z) == x * y + x * z


@given(scalars)
def test_division_inverts_multiplication(x):
    if x != 0:
        assert (ONE / x) * x == 1


@given(scalars)
def test_json_round_trip(x):
    assert parse_scalar(x.to_json()) == x


def test_json_encodings():
    assert parse_scalar(3) == 3
    assert parse_scalar("2/6") == Fraction(1, 3)
    assert parse_scalar({"r": "1/2", "s": "1/2"}) == PHI
    assert parse_scalar("inf") is INF or parse_scalar("inf") == INF
    assert PHI.to_json() == {"r": "1/2", "s": "1/2"}
    assert Scalar(Fraction(3, 4)).to_json() == "3/4"
    with pytest.raises(TypeError):
        parse_scalar(True)


def test_canonical_form():
    x = Scalar(Fraction(2, -4), Fraction(6, 3))
    assert x.a == Fraction(-1, 2) and x.a.denominator > 0
    assert hash(Scalar(Fraction(1, 2))) == hash(Fraction(1, 2))
    with pytest.raises(AttributeError):
        x.a = 1


def test_smin_of_nothing_is_infinite():
    assert smin([]) == INF
    assert smin([Scalar(3), PHI]) == PHI


def test_expectation_examples():
    assert expectation(Distribution.point(Scalar(7)), lambda x: x) == 7
    assert Distribution.uniform([1, 2]).expectation(Scalar) == Fraction(3, 2)


def test_expectation_of_mixed_ratios():
    # weights of a two-machine star family: eps on the center, (1-eps)/2 on each leaf
    eps = Fraction(1, 100)
    dist = Distribution([("center", eps), ("leaf1", (1 - eps) / 2), ("leaf2", (1 - eps) / 2)])
    values = {"center": Scalar(1), "leaf1": Scalar(1), "leaf2": Scalar(2 / (1 + eps))}
    got = dist.expectation(values.__getitem__)
    assert got == Scalar(Fraction(30001, 20200))
    assert got == eps + (1 - eps) / 2 + (1 - eps) / 2 * 2 / (1 + eps)


def test_bad_distributions_rejected():
    with pytest.raises(ValueError):
        Distribution([("a", Fraction(1, 2))])
    with pytest.raises(ValueError):
        Distribution([("a", Fraction(3, 2)), ("b", Fraction(-1, 2))])
    with pytest.raises(ValueError):
        expectation([("a", Fraction(1, 3))], lambda _: 1)
    with pytest.raises(ValueError):
        Distribution.point("a").expectation(lambda _: INF)


@given(st.lists(st.integers(min_value=1, max_value=20), min_size=1, max_size=8))
def test_library_distributions_sum_to_one(weights):
    total = sum(weights)
    dist = Distribution((k, Fraction(w, total)) for k, w in enumerate(weights))
    assert sum(p for _, p in dist) == 1
    assert sum(dist.prob(k) for k in dist.support()) == 1


def test_type_domain_profiles_and_deviations():
    dom = TypeDomain([{"a": lambda x: 0, "b": lambda x: 1}, {"c": lambda x: 0}])
    assert dom.profiles() == [("a", "c"), ("b", "c")]
    assert dom.deviations(("a", "c"), 0) == [("b", "c")]
    assert dom.deviations(("a", "c"), 1) == []
    with pytest.raises(ValueError):
        TypeDomain([{}])


def test_budget_env_override(monkeypatch):
    monkeypatch.setenv("TRUTHLAB_BUDGET", "5")
    assert budget() == 5
    with pytest.raises(BudgetExceeded):
        check_budget(6, None, "test")
    check_budget(6, 10, "test")
