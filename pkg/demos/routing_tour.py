"""Routing trees, workloads and the monotone lexicographic mechanism.

Run with ``python3 demos/routing_tour.py``.
"""
from fractions import Fraction

from truthlab.routing import (
    cost_min_tree,
    enumerate_trees,
    k_star,
    lex_monotonicity_sweep,
    optimal_workload_tree,
    phi_instance,
    relay_star_instance,
    routing_wmon_bounds,
    total_cost,
    workload,
    workloads,
)

eps = Fraction(1, 100)
inst = relay_star_instance(eps)
for tree in enumerate_trees(inst):
    print(tree.as_dict(), "workload", workload(inst, tree), "total", total_cost(inst, tree))

tree, outcome = cost_min_tree(inst)
best, _ = optimal_workload_tree(inst)
print("cost-minimizing tree:", tree.as_dict(), "payments", [str(p) for p in outcome.payments])
print("its workload over the optimum:", workload(inst, tree) / best)

for k in (3, 5, 8):
    star = k_star(k, eps)
    t, _ = cost_min_tree(star)
    print(f"k={k}: ratio {workload(star, t) / optimal_workload_tree(star)[0]}")

ins = phi_instance()
for t in enumerate_trees(ins):
    print("phi instance:", t.as_dict(), {u: str(w) for u, w in workloads(ins, t).items()})

b = routing_wmon_bounds(eps)
print(f"monotone in node I, worst case: {b.worst_case} ~ {float(b.worst_case):.4f}")
print(f"monotone in node I, 50/50 mix:  {b.randomized} ~ {float(b.randomized):.4f}")

res = lex_monotonicity_sweep()
print(f"sweep: {res.topologies} topologies, {res.selections} selections, {len(res.violations)} violations")
