"""Scheduling on unrelated machines: makespan, exact optimum, and two mechanisms.

Machines and tasks are 0-indexed.  An allocation is a tuple giving the machine
of every task.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterator, Sequence

from .core import (
    INF,
    ZERO,
    Distribution,
    MechanismOutcome,
    Scalar,
    check_budget,
    parse_scalar,
    smin,
)

Assignment = tuple  # machine index per task

FOUR_THIRDS = Fraction(4, 3)
THREE_QUARTERS = Fraction(3, 4)


@dataclass(frozen=True)
class SchedulingInstance:
    """Cost matrix ``costs[machine][task]``; costs are non-negative, ``inf`` allowed."""

    costs: tuple[tuple[Scalar, ...], ...]

    def __post_init__(self) -> None:
        rows = tuple(tuple(Scalar.coerce(c) for c in row) for row in self.costs)
        if not rows:
            raise ValueError("a scheduling instance needs at least one machine")
        n = len(rows[0])
        for row in rows:
            if len(row) != n:
                raise ValueError("cost matrix is not rectangular")
            for c in row:
                if c < 0:
                    raise ValueError(f"negative cost {c}")
        object.__setattr__(self, "costs", rows)

    @property
    def m(self) -> int:
        return len(self.costs)

    @property
    def n(self) -> int:
        return len(self.costs[0])

    def cost(self, machine: int, task: int) -> Scalar:
        return self.costs[machine][task]

    def column(self, task: int) -> tuple[Scalar, ...]:
        return tuple(row[task] for row in self.costs)

    def with_machine(self, machine: int, row: Sequence[Any]) -> SchedulingInstance:
        rows = list(self.costs)
        rows[machine] = tuple(row)
        return SchedulingInstance(tuple(rows))

    def to_json(self) -> dict:
        return {
            "type": "scheduling",
            "machines": self.m,
            "tasks": self.n,
            "costs": [[c.to_json() for c in row] for row in self.costs],
        }

    @classmethod
    def from_json(cls, obj: dict) -> SchedulingInstance:
        if obj.get("type", "scheduling") != "scheduling":
            raise ValueError(f"not a scheduling instance: {obj.get('type')!r}")
        costs = tuple(tuple(parse_scalar(c) for c in row) for row in obj["costs"])
        inst = cls(costs)
        if "machines" in obj and obj["machines"] != inst.m:
            raise ValueError("'machines' does not match the cost matrix")
        if "tasks" in obj and obj["tasks"] != inst.n:
            raise ValueError("'tasks' does not match the cost matrix")
        return inst


def _check_alloc(inst: SchedulingInstance, alloc: Sequence[int]) -> None:
    if len(alloc) != inst.n:
        raise ValueError(f"allocation has {len(alloc)} tasks, instance has {inst.n}")
    for machine in alloc:
        if not 0 <= machine < inst.m:
            raise ValueError(f"machine index {machine} out of range")


def machine_loads(inst: SchedulingInstance, alloc: Sequence[int]) -> list[Scalar]:
    _check_alloc(inst, alloc)
    loads = [ZERO] * inst.m
    for task, machine in enumerate(alloc):
        loads[machine] = loads[machine] + inst.costs[machine][task]
    return loads


def makespan(inst: SchedulingInstance, alloc: Sequence[int]) -> Scalar:
    """Latest finishing time; zero for an instance without tasks."""
    return max(machine_loads(inst, alloc), default=ZERO)


def all_allocations(m: int, n: int) -> Iterator[Assignment]:
    """All ``m**n`` allocations in lexicographic order."""
    return itertools.product(range(m), repeat=n)


def optimal_makespan(inst: SchedulingInstance, limit: int | None = None) -> tuple[Scalar, Assignment]:
    """Exact minimum makespan by depth-first branch and bound.

    Tasks are assigned in index order and machines tried in index order, so the
    first optimum reached is the lexicographically smallest optimal allocation.
    """
    check_budget(inst.m**inst.n, limit, "optimal_makespan")
    m, n = inst.m, inst.n
    loads = [ZERO] * m
    current = [0] * n
    best: list[Any] = [None, None]

    def descend(task: int, partial: Scalar) -> None:
        if task == n:
            if best[0] is None or partial < best[0]:
                best[0], best[1] = partial, tuple(current)
            return
        for machine in range(m):
            new_load = loads[machine] + inst.costs[machine][task]
            peak = new_load if new_load > partial else partial
            if best[0] is not None and peak >= best[0]:
                continue
            saved = loads[machine]
            loads[machine] = new_load
            current[task] = machine
            descend(task + 1, peak)
            loads[machine] = saved

    descend(0, ZERO)
    return best[0], best[1]


def min_work_vcg(inst: SchedulingInstance) -> tuple[Assignment, MechanismOutcome]:
    """Task-wise second-price auction: each task goes to its cheapest machine.

    Ties go to the lowest machine index.  The winner of a task is paid the
    second-lowest cost in that task's column (``inf`` when uncontested).
    """
    payments = [ZERO] * inst.m
    alloc = []
    for task in range(inst.n):
        column = inst.column(task)
        winner = min(range(inst.m), key=lambda i: (column[i], i))
        second = smin(column[i] for i in range(inst.m) if i != winner)
        payments[winner] = payments[winner] + second
        alloc.append(winner)
    alloc = tuple(alloc)
    return alloc, MechanismOutcome(alloc, tuple(payments))


# ---------------------------------------------------------------------------
# Randomized mechanism: two groups of machines, biased coin per task


def nr_partition(m: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Split machines into a first half (gets the extra machine for odd ``m``) and the rest."""
    if m < 2:
        raise ValueError("the randomized mechanism needs at least two machines")
    k = (m + 1) // 2
    return tuple(range(k)), tuple(range(k, m))


def _group_min(column: Sequence[Scalar], group: Sequence[int]) -> tuple[Scalar, int, Scalar]:
    best = min(group, key=lambda i: (column[i], i))
    runner_up = smin(column[i] for i in group if i != best)
    return column[best], best, runner_up


def nr_task_rule(column: Sequence[Scalar], coin: int, m: int | None = None) -> tuple[int, Scalar]:
    """Allocate one task given its cost column and coin; returns (machine, payment)."""
    s1, s2 = nr_partition(len(column) if m is None else m)
    v1, first, v1_next = _group_min(column, s1)
    v2, second, v2_next = _group_min(column, s2)
    if coin == 0:
        if v1 <= v2 * FOUR_THIRDS:
            return first, min(v1_next, v2 * FOUR_THIRDS)
        return second, min(v2_next, v1 * THREE_QUARTERS)
    if coin == 1:
        if v2 <= v1 * FOUR_THIRDS:
            return second, min(v2_next, v1 * FOUR_THIRDS)
        return first, min(v1_next, v2 * THREE_QUARTERS)
    raise ValueError(f"coin must be 0 or 1, got {coin!r}")


def nr_sub_mechanism(inst: SchedulingInstance, coins: Sequence[int]) -> tuple[Assignment, MechanismOutcome]:
    """The deterministic mechanism obtained by fixing one coin per task."""
    if inst.m < 2:
        raise ValueError("the randomized mechanism needs at least two machines")
    if len(coins) != inst.n:
        raise ValueError(f"expected {inst.n} coins, got {len(coins)}")
    payments = [ZERO] * inst.m
    alloc = []
    for task, coin in enumerate(coins):
        machine, pay = nr_task_rule(inst.column(task), coin, inst.m)
        payments[machine] = payments[machine] + pay
        alloc.append(machine)
    alloc = tuple(alloc)
    return alloc, MechanismOutcome(alloc, tuple(payments))


def coin_sequences(n: int) -> Iterator[tuple[int, ...]]:
    return itertools.product((0, 1), repeat=n)


def nr_randomized(inst: SchedulingInstance, limit: int | None = None) -> Distribution:
    """Uniform distribution over the ``2**n`` coin-fixed outcomes (one entry per sequence)."""
    check_budget(2**inst.n, limit, "nr_randomized")
    p = Fraction(1, 2**inst.n)
    return Distribution((nr_sub_mechanism(inst, coins), p) for coins in coin_sequences(inst.n))


def expected_makespan(inst: SchedulingInstance, dist: Distribution) -> Scalar:
    return dist.expectation(lambda outcome: makespan(inst, outcome[0]))


def collapse_to_two_machines(inst: SchedulingInstance) -> SchedulingInstance:
    """Two-machine instance whose machines carry the column minima of each group."""
    s1, s2 = nr_partition(inst.m)
    first = [smin(inst.costs[i][t] for i in s1) for t in range(inst.n)]
    second = [smin(inst.costs[i][t] for i in s2) for t in range(inst.n)]
    return SchedulingInstance((tuple(first), tuple(second)))


def nr_truthfulness_violations(
    inst: SchedulingInstance, grid: Sequence[Any]
) -> list[dict]:
    """Unilateral single-entry misreports that raise a machine's utility.

    The utility of every coin-fixed sub-mechanism is a sum of per-task terms
    and each task depends only on its own column and coin, so it suffices to
    check every (task, coin, machine, misreport) combination.
    """
    grid = [Scalar.coerce(g) for g in grid]
    found = []
    for task in range(inst.n):
        column = list(inst.column(task))
        for coin in (0, 1):
            winner, pay = nr_task_rule(column, coin, inst.m)
            for machine in range(inst.m):
                true_cost = column[machine]
                if true_cost.infinite:
                    continue
                honest = pay - true_cost if winner == machine else ZERO
                for report in grid:
                    if report == true_cost:
                        continue
                    lied = column.copy()
                    lied[machine] = report
                    w, p = nr_task_rule(lied, coin, inst.m)
                    deviating = p - true_cost if w == machine else ZERO
                    if deviating > honest:
                        found.append(
                            {
                                "task": task,
                                "coin": coin,
                                "machine": machine,
                                "report": report,
                                "honest_utility": honest,
                                "deviating_utility": deviating,
                            }
                        )
    return found


def random_instance(rng: random.Random, m: int, n: int, low: int = 1, high: int = 10) -> SchedulingInstance:
    """Integer costs drawn uniformly from ``[low, high]``."""
    return SchedulingInstance(
        tuple(tuple(Scalar(rng.randint(low, high)) for _ in range(n)) for _ in range(m))
    )


def assignment_to_json(alloc: Sequence[int]) -> dict:
    return {"assignment": list(alloc)}


def assignment_from_json(obj: dict) -> Assignment:
    return tuple(int(x) for x in obj["assignment"])


__all__ = [
    "Assignment",
    "SchedulingInstance",
    "all_allocations",
    "assignment_from_json",
    "assignment_to_json",
    "coin_sequences",
    "collapse_to_two_machines",
    "expected_makespan",
    "machine_loads",
    "makespan",
    "min_work_vcg",
    "nr_partition",
    "nr_randomized",
    "nr_sub_mechanism",
    "nr_task_rule",
    "nr_truthfulness_violations",
    "optimal_makespan",
    "random_instance",
]
