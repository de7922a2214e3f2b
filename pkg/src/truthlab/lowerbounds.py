"""Adversarial scheduling families and exhaustive searches over constrained rules.

A lower bound is reproduced as an exact optimum: the best ratio any rule can
reach on a family while satisfying a monotonicity (or Bayesian) constraint.
The published bound then becomes an inequality the optimum must satisfy.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

from .core import (
    ONE,
    Additive,
    BudgetExceeded,
    Distribution,
    Profile,
    Scalar,
    TypeDomain,
    budget,
    check_budget,
    INF,
)
from .monotonicity import Direction, bayes_2cycle_feasible, wmon_pair_holds
from .scheduling import (
    SchedulingInstance,
    all_allocations,
    makespan,
    optimal_makespan,
)

COST = Direction.COST


def scheduling_domain(types: Sequence[dict[str, Sequence[Any]]]) -> TypeDomain:
    """Type domain whose valuations are additive task-cost vectors (one dict per machine)."""
    return TypeDomain(
        [{name: Additive(i, tuple(costs)) for name, costs in table.items()} for i, table in enumerate(types)]
    )


def instance_for(domain: TypeDomain, profile: Profile) -> SchedulingInstance:
    return SchedulingInstance(
        tuple(domain.valuation(i, name).weights for i, name in enumerate(profile))
    )


@dataclass
class BoundFamily:
    """Profiles of a scheduling domain, optional prior, and the unilateral links between them."""

    family_id: str
    params: dict
    domain: TypeDomain
    profiles: tuple
    distribution: Distribution | None = None
    links: tuple = field(default=())
    _opt: dict = field(default_factory=dict, repr=False)
    _space: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self.links:
            self.links = tuple(unilateral_links(self.profiles))
        for a, b, player in self.links:
            diff = [i for i in range(len(a)) if a[i] != b[i]]
            if diff != [player]:
                raise ValueError(f"linked profiles {a} and {b} do not differ only in player {player}")

    def instance(self, profile: Profile) -> SchedulingInstance:
        return instance_for(self.domain, profile)

    def optimum(self, profile: Profile) -> Scalar:
        if profile not in self._opt:
            self._opt[profile] = optimal_makespan(self.instance(profile))[0]
        return self._opt[profile]

    def allocations(self, profile: Profile) -> list[tuple]:
        """Allocations with finite makespan (all of them if none is finite)."""
        if profile not in self._space:
            inst = self.instance(profile)
            check_budget(inst.m**inst.n, None, "family allocation space")
            every = list(all_allocations(inst.m, inst.n))
            finite = [a for a in every if makespan(inst, a).is_finite()]
            self._space[profile] = finite or every
        return self._space[profile]

    def ratio(self, profile: Profile, alloc: Sequence[int]) -> Scalar:
        value = makespan(self.instance(profile), alloc)
        if value.infinite:
            return INF
        return value / self.optimum(profile)

    def weight(self, profile: Profile) -> Fraction:
        if self.distribution is None:
            raise ValueError(f"family {self.family_id} has no distribution")
        return self.distribution.prob(profile)

    def with_distribution(self, dist: Distribution) -> BoundFamily:
        return BoundFamily(self.family_id, dict(self.params), self.domain, self.profiles, dist, self.links)


def unilateral_links(profiles: Sequence[Profile]) -> list[tuple[Profile, Profile, int]]:
    links = []
    for a, b in itertools.combinations(profiles, 2):
        diff = [i for i in range(len(a)) if a[i] != b[i]]
        if len(diff) == 1:
            links.append((a, b, diff[0]))
    return links


def _positive(eps: Any) -> Fraction:
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError(f"epsilon must be positive, got {eps}")
    return eps


def _two_type_costs(i: int, n: int, special: int, off: Any, eps: Fraction) -> tuple[list, list]:
    v = [Scalar(1) if t in (i, special) else Scalar.coerce(off) for t in range(n)]
    v_dev = [Scalar(0) if t == i else Scalar(1 + eps) if t == special else Scalar.coerce(off) for t in range(n)]
    return v, v_dev


def two_machine_family(eps: Any = Fraction(1, 100)) -> BoundFamily:
    """Two machines, three tasks; every machine has the types ``v`` and ``v'``.

    All four profiles are included: the symmetric deviation of machine 2 is
    what rules out breaking the tie on task 3 towards machine 1.
    """
    eps = _positive(eps)
    types = []
    for i in range(2):
        v, v_dev = _two_type_costs(i, 3, 2, 100, eps)
        types.append({"v": v, "v'": v_dev})
    domain = scheduling_domain(types)
    return BoundFamily("thm2", {"epsilon": eps}, domain, tuple(domain.profiles()))


def _yao_domain(m: int, eps: Fraction, off: Any) -> TypeDomain:
    types = []
    for i in range(m):
        v, v_dev = _two_type_costs(i, m + 1, m, off, eps)
        types.append({"v": v, "v'": v_dev})
    return scheduling_domain(types)


def _star_profiles(m: int) -> tuple:
    base = ("v",) * m
    return (base,) + tuple(base[:j] + ("v'",) + base[j + 1 :] for j in range(m))


def yao_family(m: int, eps: Any = Fraction(1, 100)) -> BoundFamily:
    """Instance ``I`` with probability eps and each ``I^j`` with probability (1-eps)/m."""
    eps = _positive(eps)
    if m < 2 or eps >= 1:
        raise ValueError("need m >= 2 and 0 < epsilon < 1")
    profiles = _star_profiles(m)
    dist = Distribution([(profiles[0], eps)] + [(p, (1 - eps) / m) for p in profiles[1:]])
    return BoundFamily("thm4", {"m": m, "epsilon": eps}, _yao_domain(m, eps, 4 / eps), profiles, dist)


def in_expectation_family(m: int, eps: Any = Fraction(1, 100)) -> BoundFamily:
    """Same shape as :func:`yao_family` with off-diagonal costs 4/eps^2 and no prior."""
    eps = _positive(eps)
    if m < 2 or eps >= 1:
        raise ValueError("need m >= 2 and 0 < epsilon < 1")
    return BoundFamily("thm5", {"m": m, "epsilon": eps}, _yao_domain(m, eps, 4 / eps**2), _star_profiles(m))


def bayes_family(eps: Any = Fraction(1, 100), m: int = 2) -> BoundFamily:
    """Machines 1 and 2 with two equally likely types; machines 3..m cost ``inf`` everywhere."""
    eps = _positive(eps)
    if m < 2:
        raise ValueError("need m >= 2")
    types = []
    for i in range(2):
        v, v_dev = _two_type_costs(i, 3, 2, 4 / eps, eps)
        types.append({"v": v, "v'": v_dev})
    for _ in range(2, m):
        types.append({"inf": [INF] * 3})
    domain = scheduling_domain(types)
    profiles = tuple(domain.profiles())
    return BoundFamily("thm6", {"m": m, "epsilon": eps}, domain, profiles, Distribution.uniform(profiles))


def optimal_allocation_for(m: int, j: int) -> tuple:
    """``T^j``: machine i gets task i, machine j also gets task m (the shared task)."""
    return tuple(range(m)) + (j,)


# ---------------------------------------------------------------------------
# Searches


def _link_ok(family: BoundFamily, link, a, b) -> bool:
    p, q, player = link
    v = family.domain.valuation(player, p[player])
    v_dev = family.domain.valuation(player, q[player])
    return wmon_pair_holds(v, v_dev, a, b, COST)


def _csp(family: BoundFamily, choices: dict, constrained: bool, limit: int) -> dict | None:
    """First (lexicographic) assignment of allocations to profiles satisfying every link."""
    order = list(family.profiles)
    index = {p: k for k, p in enumerate(order)}
    back_links: dict[Profile, list] = {p: [] for p in order}
    if constrained:
        for link in family.links:
            p, q, _ = link
            later = p if index[p] > index[q] else q
            back_links[later].append(link)
    chosen: dict[Profile, Any] = {}
    visited = [0]

    def go(k: int) -> bool:
        if k == len(order):
            return True
        prof = order[k]
        for alloc in choices[prof]:
            visited[0] += 1
            if visited[0] > limit:
                raise BudgetExceeded(f"rule search visited more than {limit} nodes")
            ok = True
            for link in back_links[prof]:
                p, q, _ = link
                a = alloc if p == prof else chosen[p]
                b = alloc if q == prof else chosen[q]
                if not _link_ok(family, link, a, b):
                    ok = False
                    break
            if ok:
                chosen[prof] = alloc
                if go(k + 1):
                    return True
                del chosen[prof]
        return False

    return dict(chosen) if go(0) else None


@dataclass
class SearchResult:
    value: Scalar
    certificate: dict  # profile -> allocation

    def certificate_json(self) -> list:
        return [{"profile": list(p), "allocation": list(a)} for p, a in self.certificate.items()]


def min_worst_ratio_over_wmon_rules(family: BoundFamily, wmon: bool = True, limit: int | None = None) -> SearchResult:
    """Smallest worst-case ratio over rules that are weakly monotone on every link.

    Binary search over the candidate thresholds; each threshold is a
    constraint-satisfaction problem solved by backtracking.
    """
    limit = budget() if limit is None else limit
    ratios = {p: {a: family.ratio(p, a) for a in family.allocations(p)} for p in family.profiles}
    thresholds = sorted({r for table in ratios.values() for r in table.values()})
    floor = max(min(table.values()) for table in ratios.values())
    thresholds = [t for t in thresholds if t >= floor]

    def attempt(tau: Scalar) -> dict | None:
        choices = {p: [a for a, r in ratios[p].items() if r <= tau] for p in family.profiles}
        return _csp(family, choices, wmon, limit)

    lo, hi = 0, len(thresholds) - 1
    best = None
    while lo <= hi:
        mid = (lo + hi) // 2
        cert = attempt(thresholds[mid])
        if cert is not None:
            best = (thresholds[mid], cert)
            hi = mid - 1
        else:
            lo = mid + 1
    if best is None:
        raise RuntimeError("no admissible rule found")
    tau, cert = best
    value = max(ratios[p][a] for p, a in cert.items())
    return SearchResult(value, cert)


def _star_center(family: BoundFamily) -> Profile | None:
    if len(family.profiles) < 2:
        return None
    degree: dict[Profile, int] = {p: 0 for p in family.profiles}
    for p, q, _ in family.links:
        degree[p] += 1
        degree[q] += 1
    for center in family.profiles:
        if degree[center] == len(family.profiles) - 1 and len(family.links) == len(family.profiles) - 1:
            return center
    return None


def min_expected_ratio_over_wmon_rules(
    family: BoundFamily, wmon: bool = True, limit: int | None = None
) -> SearchResult:
    """Smallest expected ratio (under the family's prior) over weakly monotone rules.

    When the links form a star (every constraint ties the center profile to
    one leaf) the center's allocation is fixed and each leaf optimized on its
    own; otherwise all rule combinations are enumerated.
    """
    if family.distribution is None:
        raise ValueError("family has no distribution")
    limit = budget() if limit is None else limit
    weights = {p: family.weight(p) for p in family.profiles}
    ratios = {p: {a: family.ratio(p, a) for a in family.allocations(p)} for p in family.profiles}

    def contribution(p, a) -> Scalar:
        w = weights[p]
        if w == 0:
            return Scalar(0)
        return ratios[p][a] * w

    center = _star_center(family)
    if center is not None:
        leaves = [(q if p == center else p, (p, q, player)) for p, q, player in family.links]
        cost = len(ratios[center]) * sum(len(ratios[leaf]) for leaf, _ in leaves)
        check_budget(cost, limit, "star search")
        best = None
        for a_c in ratios[center]:
            total = contribution(center, a_c)
            cert = {center: a_c}
            for leaf, link in leaves:
                pick = None
                for a_l in ratios[leaf]:
                    if wmon:
                        a, b = (a_c, a_l) if link[0] == center else (a_l, a_c)
                        if not _link_ok(family, link, a, b):
                            continue
                    c = contribution(leaf, a_l)
                    if pick is None or c < pick[0]:
                        pick = (c, a_l)
                total = total + pick[0]
                cert[leaf] = pick[1]
            if best is None or total < best[0]:
                best = (total, cert)
        value, cert = best
        return SearchResult(value, {p: cert[p] for p in family.profiles})

    count = 1
    for p in family.profiles:
        count *= len(ratios[p])
    check_budget(count, limit, "rule enumeration")
    best = None
    for combo in itertools.product(*(list(ratios[p]) for p in family.profiles)):
        rule = dict(zip(family.profiles, combo))
        if wmon and not all(_link_ok(family, link, rule[link[0]], rule[link[1]]) for link in family.links):
            continue
        total = sum((contribution(p, rule[p]) for p in family.profiles), Scalar(0))
        if best is None or total < best[0]:
            best = (total, rule)
    return SearchResult(best[0], best[1])


def bic_feasible(family: BoundFamily, rule: dict) -> bool:
    """Both two-type players pass the Bayesian 2-cycle condition under the family prior."""
    for player in range(family.domain.players):
        names = family.domain.names(player)
        if len(names) != 2:
            continue
        if not bayes_2cycle_feasible(rule, family.domain, family.distribution, player, names[0], names[1], COST):
            return False
    return True


def expected_ratio(family: BoundFamily, rule: dict) -> Scalar:
    return family.distribution.expectation(lambda p: family.ratio(p, rule[p]))


def min_expected_ratio_over_bic_rules(family: BoundFamily, bic: bool = True, limit: int | None = None) -> SearchResult:
    """Exhaustive search over deterministic rules of a Bayesian family."""
    if family.distribution is None:
        raise ValueError("family has no prior")
    spaces = [family.allocations(p) for p in family.profiles]
    count = 1
    for s in spaces:
        count *= len(s)
    check_budget(count, limit, "Bayesian rule enumeration")
    ratios = {p: {a: family.ratio(p, a) for a in family.allocations(p)} for p in family.profiles}
    best = None
    for combo in itertools.product(*spaces):
        rule = dict(zip(family.profiles, combo))
        total = family.distribution.expectation(lambda p: ratios[p][rule[p]])
        if best is not None and total >= best[0]:
            continue
        if bic and not bic_feasible(family, rule):
            continue
        best = (total, rule)
    return SearchResult(best[0], best[1])


def bayes_case_rules(family: BoundFamily) -> dict[str, dict]:
    """The two deterministic rules examined in the 1.25 argument (machine 1's report decides)."""
    t1, t2 = optimal_allocation_for(2, 0), optimal_allocation_for(2, 1)
    rest = tuple("inf" for _ in range(2, family.domain.players))

    def rule(table: dict) -> dict:
        return {k + rest: v for k, v in table.items()}

    case1 = rule({("v", "v"): t2, ("v", "v'"): t2, ("v'", "v"): t1, ("v'", "v'"): t1})
    case2 = rule({("v", "v"): t2, ("v", "v'"): t2, ("v'", "v"): t1, ("v'", "v'"): t2})
    return {"case1": case1, "case2": case2}


# ---------------------------------------------------------------------------
# Marginal bound for mechanisms monotone in expectation


def _solve(rows: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction] | None:
    """Gauss-Jordan on a square system; ``None`` if singular."""
    n = len(rows)
    a = [row[:] + [r] for row, r in zip(rows, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return None
        a[col], a[pivot] = a[pivot], a[col]
        pv = a[col][col]
        a[col] = [x / pv for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [a[r][n] for r in range(n)]


def lp_max_by_vertices(
    objective: Sequence[Fraction], constraints: Sequence[tuple[Sequence[Fraction], Fraction]]
) -> tuple[Fraction, list[Fraction]]:
    """Maximize ``objective . x`` over the bounded polytope ``{x : a . x <= b}`` exactly.

    Every vertex is the solution of some ``n`` active constraints, so the
    optimum is found by enumerating those subsets.  Only meant for tiny systems.
    """
    n = len(objective)
    best: tuple[Fraction, list[Fraction]] | None = None
    for subset in itertools.combinations(range(len(constraints)), n):
        point = _solve([list(constraints[k][0]) for k in subset], [constraints[k][1] for k in subset])
        if point is None:
            continue
        if all(sum(c * x for c, x in zip(a, point)) <= b for a, b in constraints):
            value = sum(c * x for c, x in zip(objective, point))
            if best is None or value > best[0]:
                best = (value, point)
    if best is None:
        raise ValueError("empty feasible region")
    return best


@dataclass
class MarginalBound:
    value: Scalar
    vertex: dict  # variable name -> value at the optimum


def max_shared_marginal(m: int, eps: Any, machine: int = 0, same_distribution: bool = False) -> MarginalBound:
    """Largest ``p_{r,shared}(P^r)`` allowed by extended weak monotonicity.

    Variables are machine ``r``'s marginals under ``P`` (instance ``I``) and
    ``P^r`` (instance ``I^r``) for every task.  Constraints: box bounds,
    ``p_{r,r}(P) >= 1 - eps^2``, ``p_{r,shared}(P) <= 1/m`` and the extended
    monotonicity inequality with the 4/eps^2 family's valuations.  Variables
    that only appear in their box bounds are dropped before the vertex
    enumeration.  ``same_distribution`` forces ``P = P^r``.
    """
    eps = _positive(eps)
    if m < 2 or eps >= 1:
        raise ValueError("need m >= 2 and 0 < epsilon < 1")
    family = in_expectation_family(m, eps)
    v = family.domain.valuation(machine, "v").weights
    v_dev = family.domain.valuation(machine, "v'").weights
    n, shared = m + 1, m
    names = [f"P[{t}]" for t in range(n)] + [f"Pr[{t}]" for t in range(n)]
    k = 2 * n

    def unit(idx: int, coef: Fraction = Fraction(1)) -> list[Fraction]:
        row = [Fraction(0)] * k
        row[idx] = coef
        return row

    constraints: list[tuple[list[Fraction], Fraction]] = []
    for idx in range(k):
        constraints.append((unit(idx), Fraction(1)))
        constraints.append((unit(idx, Fraction(-1)), Fraction(0)))
    constraints.append((unit(machine, Fraction(-1)), -(1 - eps**2)))
    constraints.append((unit(shared), Fraction(1, m)))
    wmon = [Fraction(0)] * k
    for t in range(n):
        diff = (v[t] - v_dev[t]).rational()
        wmon[t] += diff
        wmon[n + t] -= diff
    constraints.append((wmon, Fraction(0)))
    objective = unit(n + shared)

    if same_distribution:
        # substitute Pr[t] := P[t]
        def fold(row):
            return [row[t] + row[n + t] for t in range(n)] + [Fraction(0)] * n

        constraints = [(fold(a), b) for a, b in constraints]
        objective = fold(objective)

    structural = constraints[2 * k :]
    keep = [
        idx
        for idx in range(k)
        if objective[idx] != 0 or any(a[idx] != 0 for a, _ in structural)
    ]
    reduced = []
    for a, b in constraints:
        if any(a[idx] != 0 for idx in range(k) if idx not in keep):
            continue  # box bound of a dropped variable
        if all(a[idx] == 0 for idx in keep):
            if b < 0:
                raise ValueError("infeasible constant constraint")
            continue
        reduced.append(([a[idx] for idx in keep], b))
    value, point = lp_max_by_vertices([objective[idx] for idx in keep], reduced)
    return MarginalBound(Scalar(value), {names[idx]: x for idx, x in zip(keep, point)})


def in_expectation_ratio_bound(m: int, eps: Any) -> Scalar:
    """Expected ratio forced on ``I^r`` once ``T^r`` has probability at most the marginal bound."""
    eps = _positive(eps)
    q = max_shared_marginal(m, eps).value
    return (ONE - q) * Scalar(2) / Scalar(1 + eps) + q


def yao_closing_expression(m: int, eps: Any) -> Scalar:
    eps = _positive(eps)
    return Scalar(Fraction(m - 1) * (1 - eps) / m * 2 / (1 + eps) + (1 - eps) / m)


def bayes_closing_expression(eps: Any) -> Scalar:
    """``5/4 - delta`` with ``delta = (1 - 1/(1+eps)) / 2``."""
    eps = _positive(eps)
    return Scalar(Fraction(5, 4) - (1 - 1 / (1 + eps)) / 2)


# ---------------------------------------------------------------------------
# Strongly monotone mechanisms: iterative zeroing adversary


@dataclass
class SmonRun:
    instance: SchedulingInstance
    allocation: tuple
    ratio: Scalar
    optimum: Scalar
    heavy_machine: int
    queries: int
    witnesses: list  # queries where the allocation changed (SMON violations)


def _query(mech: Callable, inst: SchedulingInstance) -> tuple:
    out = mech(inst)
    if isinstance(out, tuple) and len(out) == 2 and not isinstance(out[0], int):
        out = out[0]
    alloc = tuple(out)
    if len(alloc) != inst.n or any(not (isinstance(x, int) and 0 <= x < inst.m) for x in alloc):
        raise ValueError(f"mechanism returned an invalid allocation {alloc!r}")
    return alloc


def smon_adversary(mech: Callable, m: int) -> SmonRun:
    """Drive a black-box mechanism to makespan ``m`` on an instance with optimum 1.

    Starting from the all-ones instance on ``m*m`` tasks, each machine in turn
    (except the heavy one, and skipping machines with no tasks) is made free on
    the tasks it received; finally the heavy machine keeps cost 1 only on ``m``
    of its tasks.  A strongly monotone mechanism must keep its first
    allocation throughout; any change is recorded as a witness.
    """
    if m < 1:
        raise ValueError("need m >= 1")
    n = m * m
    rows = [[Scalar(1)] * n for _ in range(m)]
    inst = SchedulingInstance(tuple(tuple(r) for r in rows))
    start = _query(mech, inst)
    queries = 1
    bundles = [{t for t, owner in enumerate(start) if owner == i} for i in range(m)]
    heavy = next(i for i in range(m) if len(bundles[i]) >= m)
    witnesses = []
    for i in range(m):
        if i == heavy or not bundles[i]:
            continue
        rows[i] = [Scalar(0) if t in bundles[i] else Scalar(1) for t in range(n)]
        inst = SchedulingInstance(tuple(tuple(r) for r in rows))
        got = _query(mech, inst)
        queries += 1
        if got != start:
            witnesses.append({"machine": i, "expected": list(start), "got": list(got)})
    kept = sorted(bundles[heavy])[:m]
    rows[heavy] = [Scalar(0) if (t in bundles[heavy] and t not in kept) else Scalar(1) for t in range(n)]
    final_inst = SchedulingInstance(tuple(tuple(r) for r in rows))
    final = _query(mech, final_inst)
    queries += 1
    if final != start:
        witnesses.append({"machine": heavy, "expected": list(start), "got": list(final)})
    opt, _ = optimal_makespan(final_inst)
    return SmonRun(final_inst, final, makespan(final_inst, final) / opt, opt, heavy, queries, witnesses)
