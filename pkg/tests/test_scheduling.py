import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from truthlab.core import INF, BudgetExceeded, Scalar
from truthlab.lowerbounds import two_machine_family, yao_family
from truthlab.scheduling import (
    SchedulingInstance,
    all_allocations,
    assignment_from_json,
    assignment_to_json,
    coin_sequences,
    collapse_to_two_machines,
    expected_makespan,
    makespan,
    min_work_vcg,
    nr_partition,
    nr_randomized,
    nr_sub_mechanism,
    nr_task_rule,
    nr_truthfulness_violations,
    optimal_makespan,
    random_instance,
)

EPS = Fraction(1, 100)

costs = st.integers(min_value=0, max_value=9)


@st.composite
def instances(draw, min_m=1, max_m=3, max_n=4):
    m = draw(st.integers(min_value=min_m, max_value=max_m))
    n = draw(st.integers(min_value=0, max_value=max_n))
    return SchedulingInstance(tuple(tuple(draw(costs) for _ in range(n)) for _ in range(m)))


def reverse_order_optimum(inst):
    # independent oracle: enumerate with the last task varying slowest
    best = None
    for rev in itertools.product(range(inst.m), repeat=inst.n):
        alloc = tuple(reversed(rev))
        loads = [Scalar(0)] * inst.m
        for t, i in enumerate(alloc):
            loads[i] = loads[i] + inst.costs[i][t]
        peak = max(loads)
        if best is None or peak < best:
            best = peak
    return best


def test_makespan_examples():
    fam = two_machine_family(EPS)
    assert makespan(SchedulingInstance(((),)), ()) == 0
    assert makespan(fam.instance(("v", "v")), (0, 1, 1)) == 2
    assert makespan(fam.instance(("v'", "v")), (0, 1, 0)) == 1 + EPS


def test_makespan_with_infinite_cost():
    inst = SchedulingInstance(((1, INF), (2, 2)))
    assert makespan(inst, (0, 0)) == INF
    assert makespan(inst, (0, 1)) == 2


def test_makespan_rejects_bad_allocation():
    inst = SchedulingInstance(((1, 2),))
    with pytest.raises(ValueError):
        makespan(inst, (0,))
    with pytest.raises(ValueError):
        makespan(inst, (0, 1))


def test_instance_validation():
    with pytest.raises(ValueError):
        SchedulingInstance(())
    with pytest.raises(ValueError):
        SchedulingInstance(((1, 2), (3,)))
    with pytest.raises(ValueError):
        SchedulingInstance(((-1,),))


def test_optimal_makespan_examples():
    fam = two_machine_family(EPS)
    value, alloc = optimal_makespan(fam.instance(("v", "v")))
    assert value == 2 and alloc == (0, 1, 0)
    assert optimal_makespan(SchedulingInstance(((3, 4, 5),)))[0] == 12


def test_optimal_matches_reverse_enumeration_on_random_instances():
    rng = random.Random(11)
    for _ in range(30):
        inst = random_instance(rng, 3, 4)
        assert optimal_makespan(inst)[0] == reverse_order_optimum(inst)


@given(instances())
def test_optimum_is_lexicographically_first_and_minimal(inst):
    value, alloc = optimal_makespan(inst)
    spans = {a: makespan(inst, a) for a in all_allocations(inst.m, inst.n)}
    assert all(value <= s for s in spans.values())
    assert alloc == min(a for a, s in spans.items() if s == value)


def test_optimal_respects_budget():
    inst = SchedulingInstance(tuple((1,) * 8 for _ in range(3)))
    with pytest.raises(BudgetExceeded):
        optimal_makespan(inst, limit=100)


@given(instances(max_n=3), st.lists(costs, min_size=1, max_size=3))
def test_adding_a_task_never_lowers_makespan(inst, column):
    column = (column * inst.m)[: inst.m]
    bigger = SchedulingInstance(tuple(row + (c,) for row, c in zip(inst.costs, column)))
    for alloc in all_allocations(inst.m, inst.n):
        for i in range(inst.m):
            assert makespan(bigger, alloc + (i,)) >= makespan(inst, alloc)


def test_min_work_vcg_single_task():
    alloc, out = min_work_vcg(SchedulingInstance(((1,), (5,))))
    assert alloc == (0,)
    assert out.payments == (Scalar(5), Scalar(0))


def test_min_work_vcg_on_star_center():
    inst = yao_family(2, EPS).instance(("v", "v"))
    alloc, _ = min_work_vcg(inst)
    assert alloc == (0, 1, 0)
    assert makespan(inst, alloc) == 2


def test_min_work_vcg_is_m_approximate():
    rng = random.Random(3)
    for _ in range(1000):
        m = rng.randint(1, 3)
        inst = random_instance(rng, m, rng.randint(1, 4))
        alloc, _ = min_work_vcg(inst)
        assert makespan(inst, alloc) <= optimal_makespan(inst)[0] * m


def test_uncontested_task_is_paid_infinity():
    _, out = min_work_vcg(SchedulingInstance(((2,),)))
    assert out.payments == (INF,)


def test_nr_single_task_examples():
    inst = SchedulingInstance(((1,), (2,)))
    alloc, out = nr_sub_mechanism(inst, (0,))
    assert alloc == (0,) and out.payments[0] == Fraction(8, 3)
    alloc, out = nr_sub_mechanism(inst, (1,))
    assert alloc == (0,) and out.payments[0] == Fraction(3, 2)
    dist = nr_randomized(inst)
    assert len(dist) == 2 and all(o[0] == (0,) for o, _ in dist)
    assert expected_makespan(inst, dist) == 1 == optimal_makespan(inst)[0]


def test_nr_matches_two_machine_thresholds():
    # with two machines every branch is a 4/3-biased second price between the two
    rng = random.Random(5)
    for _ in range(200):
        a, b = rng.randint(1, 12), rng.randint(1, 12)
        m0, p0 = nr_task_rule([Scalar(a), Scalar(b)], 0)
        assert (m0 == 0) == (a <= Fraction(4, 3) * b)
        assert p0 == (Fraction(4, 3) * b if m0 == 0 else Fraction(3, 4) * a)
        m1, p1 = nr_task_rule([Scalar(a), Scalar(b)], 1)
        assert (m1 == 1) == (b <= Fraction(4, 3) * a)
        assert p1 == (Fraction(4, 3) * a if m1 == 1 else Fraction(3, 4) * b)


def test_nr_needs_two_machines():
    with pytest.raises(ValueError):
        nr_sub_mechanism(SchedulingInstance(((1,),)), (0,))
    with pytest.raises(ValueError):
        nr_partition(1)


def test_odd_partition_puts_extra_machine_first():
    assert nr_partition(5) == ((0, 1, 2), (3, 4))
    assert nr_partition(4) == ((0, 1), (2, 3))


@given(instances(min_m=2, max_m=4, max_n=4), st.data())
def test_nr_sub_mechanism_assigns_every_task_with_finite_payments(inst, data):
    coins = data.draw(st.tuples(*[st.integers(0, 1)] * inst.n))
    alloc, out = nr_sub_mechanism(inst, coins)
    assert len(alloc) == inst.n and all(0 <= i < inst.m for i in alloc)
    assert all(p.is_finite() for p in out.payments)


@given(instances(min_m=2, max_m=4, max_n=3))
def test_nr_per_task_truthfulness(inst):
    assert nr_truthfulness_violations(inst, (0, 1, 3, 6, 11)) == []


@given(instances(min_m=2, max_m=4, max_n=3))
def test_nr_makespan_bounded_by_collapsed_instance(inst):
    collapsed = collapse_to_two_machines(inst)
    for coins in coin_sequences(inst.n):
        a = makespan(inst, nr_sub_mechanism(inst, coins)[0])
        b = makespan(collapsed, nr_sub_mechanism(collapsed, coins)[0])
        assert a <= b


@pytest.mark.parametrize("m,factor", [(2, Fraction(7, 4)), (4, Fraction(7, 2))])
def test_nr_expected_makespan_guarantee(m, factor):
    rng = random.Random(m)
    for _ in range(60):
        inst = random_instance(rng, m, rng.randint(1, 5))
        assert expected_makespan(inst, nr_randomized(inst)) <= optimal_makespan(inst)[0] * factor


def test_nr_randomized_budget():
    inst = SchedulingInstance(((1,) * 5, (1,) * 5))
    with pytest.raises(BudgetExceeded):
        nr_randomized(inst, limit=16)


def test_json_round_trips():
    inst = SchedulingInstance(((1, Fraction(1, 3)), (INF, 2)))
    obj = inst.to_json()
    assert obj == {"type": "scheduling", "machines": 2, "tasks": 2, "costs": [[1, "1/3"], ["inf", 2]]}
    assert SchedulingInstance.from_json(obj) == inst
    assert assignment_from_json(assignment_to_json((1, 0))) == (1, 0)
    with pytest.raises(ValueError):
        SchedulingInstance.from_json({**obj, "machines": 3})
