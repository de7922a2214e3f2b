"""Walk through the exhaustive lower-bound searches on small scheduling domains.

Run with ``python3 demos/lower_bounds_tour.py``.
"""
from fractions import Fraction

from truthlab.lowerbounds import (
    bayes_case_rules,
    bayes_family,
    bic_feasible,
    max_shared_marginal,
    min_expected_ratio_over_bic_rules,
    min_expected_ratio_over_wmon_rules,
    min_worst_ratio_over_wmon_rules,
    smon_adversary,
    two_machine_family,
    yao_family,
)
from truthlab.scheduling import min_work_vcg

eps = Fraction(1, 100)

fam = two_machine_family(eps)
free = min_worst_ratio_over_wmon_rules(fam, wmon=False)
tied = min_worst_ratio_over_wmon_rules(fam)
print("two machines, two tasks per player type")
print(f"  best worst-case ratio, any rule:          {free.value}")
print(f"  best worst-case ratio, monotone rules:    {tied.value}  (2/(1+eps) = {2 / (1 + eps)})")

for m in (2, 3):
    res = min_expected_ratio_over_wmon_rules(yao_family(m, eps))
    print(f"m={m}: best expected ratio under the hard distribution = {res.value} ~ {float(res.value):.4f}")

for m in (2, 3, 5):
    mb = max_shared_marginal(m, eps)
    print(f"m={m}: largest probability of winning the shared task = {mb.value}")

fam = bayes_family(eps)
res = min_expected_ratio_over_bic_rules(fam)
print(f"Bayesian setting: best expected ratio over BIC rules = {res.value}")
for name, rule in bayes_case_rules(fam).items():
    print(f"  {name}: BIC feasible = {bic_feasible(fam, rule)}")

# the adversary only queries the mechanism, never the optimum
for m in (2, 3):
    run = smon_adversary(lambda inst: min_work_vcg(inst)[0], m)
    print(f"adversary vs task-wise VCG, m={m}: makespan ratio {run.ratio}, optimum {run.optimum}")
