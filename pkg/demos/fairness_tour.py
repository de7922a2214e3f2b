"""Fairness objectives and why monotone rules struggle with them.

Run with ``python3 demos/fairness_tour.py``.
"""
from fractions import Fraction

from truthlab.fairness import (
    envy_bound_demo,
    max_min_impossibility_demo,
    max_min_instances,
    max_min_value,
)

eps = Fraction(1, 100)
first, second = max_min_instances(10, eps)
print("max-min optimum before and after player 2 changes:", max_min_value(first)[0], max_min_value(second)[0])

for c in (1, 10):
    demo = max_min_impossibility_demo(c, eps)
    print(f"c={c}: {len(demo.qualifying)} c-approximate pairs, all break monotonicity: {demo.all_qualifying_violate}")
    for p in demo.qualifying:
        print(f"   {p['first']} -> {p['second']}: {p['lhs']} < {p['rhs']}")

demo = envy_bound_demo(eps)
print("alpha before/after:", [str(a) for a in demo.alpha])
print("least envy before/after:", [str(o) for o in demo.optimum])
print("allocation a monotone rule must keep:", demo.forced, "with envy", demo.final_envy)
