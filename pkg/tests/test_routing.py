import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from truthlab.core import PHI, SQRT5, Scalar
from truthlab.routing import (
    RoutingInstance,
    RoutingTree,
    cost_min_tree,
    enumerate_trees,
    relay_star_instance,
    relay_star_single_dimensional,
    phi_instance,
    phi_raised_instance,
    k_star,
    lex_monotonicity_sweep,
    lex_optimal_mechanism,
    optimal_workload_tree,
    packets_through,
    random_routing_instance,
    routing_wmon_bounds,
    small_topologies,
    total_cost,
    validate_tree,
    workload,
    workloads,
)

EPS = Fraction(1, 100)
THROUGH_X = RoutingTree.of({"x": "d", "y": "x", "z": "x"})
DIRECT = RoutingTree.of({"x": "d", "y": "d", "z": "d"})


def via(node):
    return RoutingTree.of({"I": node, "II": "d", "III": "d"})


def test_relay_star_workloads_and_costs():
    inst = relay_star_instance(EPS)
    assert workload(inst, THROUGH_X) == 3
    assert workload(inst, DIRECT) == 1 + EPS
    assert total_cost(inst, THROUGH_X) == 3
    assert total_cost(inst, DIRECT) == 3 + 2 * EPS


def test_single_edge():
    inst = RoutingInstance.build(["s", "d"], "d", {("s", "d"): Fraction(7, 3)})
    tree = RoutingTree.of({"s": "d"})
    assert workload(inst, tree) == Fraction(7, 3) == total_cost(inst, tree)
    assert enumerate_trees(inst) == [tree]
    assert cost_min_tree(inst)[0] == tree
    assert lex_optimal_mechanism(inst) == tree


def test_tree_counts():
    assert len(enumerate_trees(relay_star_instance(EPS))) == 4
    chain = RoutingInstance.build(["a", "b", "d"], "d", {("a", "b"): 1, ("b", "d"): 1})
    assert len(enumerate_trees(chain)) == 1
    assert len(enumerate_trees(phi_instance())) == 2


def test_cycles_are_excluded():
    inst = RoutingInstance.build(["a", "b", "d"], "d", {("a", "b"): 1, ("b", "a"): 1, ("a", "d"): 1, ("b", "d"): 1})
    trees = enumerate_trees(inst)
    assert len(trees) == 3
    with pytest.raises(ValueError):
        validate_tree(inst, RoutingTree.of({"a": "b", "b": "a"}))


def test_optimal_workload_trees():
    w, tree = optimal_workload_tree(relay_star_instance(EPS))
    assert (w, tree) == (1 + EPS, DIRECT)
    w, tree = optimal_workload_tree(phi_instance())
    assert (w, tree) == (1, via("II"))


def test_cost_min_tree_on_relay_star():
    inst = relay_star_instance(EPS)
    tree, out = cost_min_tree(inst)
    assert tree == THROUGH_X
    assert workload(inst, tree) / optimal_workload_tree(inst)[0] == Scalar(3 / (1 + EPS))


@pytest.mark.parametrize("k", [3, 4, 5])
def test_star_generalization(k):
    inst = k_star(k, EPS)
    tree, _ = cost_min_tree(inst)
    assert workload(inst, tree) / optimal_workload_tree(inst)[0] == Scalar(Fraction(k) / (1 + EPS))


def test_single_dimensional_relay_star():
    inst = relay_star_single_dimensional(EPS)
    assert inst.is_single_dimensional()
    tree, _ = cost_min_tree(inst)
    assert tree.hop("y") == "x" and tree.hop("z") == "x"
    assert workload(inst, tree) / optimal_workload_tree(inst)[0] == Scalar(3 / (1 + EPS))


def test_cost_min_is_n_approximate_on_random_instances():
    rng = random.Random(17)
    for _ in range(200):
        inst = random_routing_instance(rng, rng.randint(1, 5))
        tree, _ = cost_min_tree(inst)
        assert workload(inst, tree) <= optimal_workload_tree(inst)[0] * len(inst.sources)


def test_cost_min_payments_are_truthful():
    rng = random.Random(4)
    for _ in range(40):
        inst = random_routing_instance(rng, 3)
        tree, out = cost_min_tree(inst)
        idx = {u: k for k, u in enumerate(inst.sources)}
        for u in inst.sources:
            honest = out.payments[idx[u]] - workloads(inst, tree)[u]
            for _ in range(5):
                lie_edges = tuple((a, b, Scalar(rng.randint(0, 6)) if a == u else c) for a, b, c in inst.edges)
                lied = RoutingInstance(inst.nodes, inst.dest, lie_edges, inst.traffic)
                t2, o2 = cost_min_tree(lied)
                assert o2.payments[idx[u]] - workloads(inst, t2)[u] <= honest


def test_lexicographic_choice_between_equal_workloads():
    # both trees have workload 2; sorted vectors (2, 2, 0, 0) and (2, 1, 0, 0)
    inst = RoutingInstance.single_dimensional(
        ["a", "b", "e", "f", "d"],
        "d",
        [("a", "d"), ("b", "e"), ("b", "f"), ("e", "d"), ("f", "d")],
        {"a": 1, "b": 0, "e": 2, "f": 1},
        {"a": 2, "b": 1, "e": 0, "f": 0},
    )
    first, second = enumerate_trees(inst)
    assert sorted(workloads(inst, first).values(), reverse=True) == [2, 2, 0, 0]
    assert sorted(workloads(inst, second).values(), reverse=True) == [2, 1, 0, 0]
    assert lex_optimal_mechanism(inst) == second


def test_lex_mechanism_needs_single_costs():
    with pytest.raises(ValueError):
        lex_optimal_mechanism(phi_instance())


def test_lex_sweep_on_a_few_topologies():
    tops = small_topologies()
    assert all(len({u for u, _ in t}) == 3 for t in tops)
    res = lex_monotonicity_sweep(grid=[0, Fraction(1, 2), 1, 2], topologies=tops[::20], scale=2)
    assert res.violations == []


def test_lex_sweep_matches_exact_mechanism():
    rng = random.Random(9)
    tops = small_topologies()
    for _ in range(30):
        links = rng.choice(tops)
        costs = {u: Fraction(rng.randint(0, 16), 4) for u in ("a", "b", "c")}
        inst = RoutingInstance.single_dimensional(("a", "b", "c", "d"), "d", links, costs)
        tree = lex_optimal_mechanism(inst)
        best = min(sorted(workloads(inst, t).values(), reverse=True) for t in enumerate_trees(inst))
        assert sorted(workloads(inst, tree).values(), reverse=True) == best


def test_phi_instance_values():
    ins, ins2 = phi_instance(), phi_raised_instance(EPS)
    assert workload(ins, via("III")) == PHI == (1 + SQRT5) / 2
    assert workload(ins, via("II")) == 1
    assert workload(ins2, via("III")) == PHI
    assert workload(ins2, via("II")) == PHI * PHI - EPS
    assert optimal_workload_tree(ins2)[0] == PHI


def test_routing_bounds():
    b = routing_wmon_bounds(EPS)
    assert b.worst_case == PHI - EPS / PHI
    assert b.randomized == (3 + SQRT5) / 4 - EPS / (2 * PHI)
    assert b.worst_case >= PHI - b.delta_worst
    assert b.randomized >= (3 + SQRT5) / 4 - b.delta_randomized
    free = routing_wmon_bounds(EPS, wmon=False)
    assert free.worst_case == 1 and free.randomized == 1
    with pytest.raises(ValueError):
        routing_wmon_bounds(1)


def test_instance_validation():
    with pytest.raises(ValueError):
        RoutingInstance.build(["a", "b", "d"], "d", {("a", "d"): 1})
    with pytest.raises(ValueError):
        RoutingInstance.build(["a", "d"], "d", {("a", "d"): -1})
    with pytest.raises(ValueError):
        RoutingInstance.build(["a", "d"], "d", {("a", "d"): 1}, {"a": 1, "d": 1})
    with pytest.raises(ValueError):
        relay_star_instance(0)


def test_json_round_trip():
    for inst in (relay_star_instance(EPS), phi_raised_instance(EPS), relay_star_single_dimensional(EPS)):
        assert RoutingInstance.from_json(inst.to_json()) == inst
    assert RoutingTree.from_json(THROUGH_X.to_json()) == THROUGH_X
    assert THROUGH_X.to_json() == {"nexthop": {"x": "d", "y": "x", "z": "x"}}


@given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=1, max_value=4))
def test_trees_are_valid_and_costs_add_up(seed, n):
    inst = random_routing_instance(random.Random(seed), n)
    for tree in enumerate_trees(inst):
        validate_tree(inst, tree)
        assert total_cost(inst, tree) == sum(workloads(inst, tree).values(), Scalar(0))
        through = packets_through(inst, tree)
        assert all(through[u] >= inst.traffic_of(u) for u in inst.sources)
