"""Fairness objectives over indivisible items: Max-Min, Min-Max, envy.

Allocations are owner tuples (player index per item) and always hand out
every item: with free disposal, withholding items would make zero envy
trivially reachable.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterator, Sequence

from .core import INF, ZERO, Additive, Scalar, SetFunction, check_budget, parse_scalar
from .monotonicity import wmon_sides

MAX_TABLE_ITEMS = 16


@dataclass(frozen=True)
class FairnessInstance:
    valuations: tuple  # Additive or SetFunction, one per player
    items: int

    def __post_init__(self) -> None:
        vals = tuple(self.valuations)
        if not vals:
            raise ValueError("need at least one player")
        for i, v in enumerate(vals):
            if v.player != i:
                raise ValueError(f"valuation {i} belongs to player {v.player}")
            if isinstance(v, Additive):
                if len(v.weights) != self.items:
                    raise ValueError(f"player {i}: expected {self.items} item values")
                if any(w < 0 or not w.is_finite() for w in v.weights):
                    raise ValueError(f"player {i}: item values must be finite and non-negative")
            elif isinstance(v, SetFunction):
                if self.items > MAX_TABLE_ITEMS:
                    raise ValueError(f"set-function tables are limited to {MAX_TABLE_ITEMS} items")
                if v.items != self.items:
                    raise ValueError(f"player {i}: table does not cover {self.items} items")
                _check_table(i, v.table, self.items)
            else:
                raise TypeError(f"unsupported valuation {type(v).__name__}")
        object.__setattr__(self, "valuations", vals)

    @classmethod
    def additive(cls, rows: Sequence[Sequence[Any]]) -> FairnessInstance:
        rows = [list(r) for r in rows]
        return cls(tuple(Additive(i, tuple(r)) for i, r in enumerate(rows)), len(rows[0]) if rows else 0)

    @property
    def players(self) -> int:
        return len(self.valuations)

    def value(self, player: int, bundle: Sequence[int]) -> Scalar:
        return self.valuations[player].bundle_value(bundle)

    def to_json(self) -> dict:
        vals = []
        for v in self.valuations:
            if isinstance(v, Additive):
                vals.append({"additive": [w.to_json() for w in v.weights]})
            else:
                vals.append({"table": {str(mask): x.to_json() for mask, x in enumerate(v.table)}})
        return {"type": "fairness", "players": self.players, "items": self.items, "valuations": vals}

    @classmethod
    def from_json(cls, obj: dict) -> FairnessInstance:
        if obj.get("type", "fairness") != "fairness":
            raise ValueError(f"not a fairness instance: {obj.get('type')!r}")
        items = int(obj["items"])
        vals = []
        for i, spec in enumerate(obj["valuations"]):
            if "additive" in spec:
                vals.append(Additive(i, tuple(parse_scalar(x) for x in spec["additive"])))
            elif "table" in spec:
                table = {int(k): parse_scalar(x) for k, x in spec["table"].items()}
                if set(table) != set(range(2**items)):
                    raise ValueError(f"player {i}: table must list every bitmask 0..{2**items - 1}")
                vals.append(SetFunction(i, tuple(table[k] for k in range(2**items))))
            else:
                raise ValueError(f"player {i}: valuation needs 'additive' or 'table'")
        inst = cls(tuple(vals), items)
        if "players" in obj and obj["players"] != inst.players:
            raise ValueError("'players' does not match the valuations")
        return inst


def _check_table(player: int, table: Sequence[Scalar], items: int) -> None:
    if table[0] != 0:
        raise ValueError(f"player {player}: the empty bundle must be worth 0")
    for mask in range(len(table)):
        for j in range(items):
            bigger = mask | (1 << j)
            if bigger != mask and table[bigger] < table[mask]:
                raise ValueError(f"player {player}: valuation is not monotone at bundle {mask}")


def bundles(alloc: Sequence[int], players: int) -> list[list[int]]:
    out: list[list[int]] = [[] for _ in range(players)]
    for item, owner in enumerate(alloc):
        out[owner].append(item)
    return out


def all_item_allocations(inst: FairnessInstance, limit: int | None = None) -> Iterator[tuple]:
    check_budget(inst.players**inst.items, limit, "item allocation enumeration")
    return itertools.product(range(inst.players), repeat=inst.items)


def player_values(inst: FairnessInstance, alloc: Sequence[int]) -> list[Scalar]:
    return [inst.value(i, b) for i, b in enumerate(bundles(alloc, inst.players))]


def max_min_value(inst: FairnessInstance, limit: int | None = None) -> tuple[Scalar, tuple]:
    best = None
    for alloc in all_item_allocations(inst, limit):
        worst = min(player_values(inst, alloc))
        if best is None or worst > best[0]:
            best = (worst, alloc)
    return best


def min_max_value(inst: FairnessInstance, limit: int | None = None) -> tuple[Scalar, tuple]:
    best = None
    for alloc in all_item_allocations(inst, limit):
        peak = max(player_values(inst, alloc))
        if best is None or peak < best[0]:
            best = (peak, alloc)
    return best


def envy(inst: FairnessInstance, alloc: Sequence[int]) -> Scalar:
    """Largest ``v_i(S_j) - v_i(S_i)`` over ordered pairs, ``i == j`` included (so never negative)."""
    parts = bundles(alloc, inst.players)
    worst = ZERO
    for i in range(inst.players):
        own = inst.value(i, parts[i])
        for j in range(inst.players):
            gap = inst.value(i, parts[j]) - own
            if gap > worst:
                worst = gap
    return worst


def min_envy(inst: FairnessInstance, limit: int | None = None) -> tuple[Scalar, tuple]:
    best = None
    for alloc in all_item_allocations(inst, limit):
        e = envy(inst, alloc)
        if best is None or e < best[0]:
            best = (e, alloc)
    return best


def max_marginal_utility(inst: FairnessInstance, limit: int | None = None) -> Scalar:
    """Largest gain from adding one item to any bundle, over all players."""
    best = ZERO
    for v in inst.valuations:
        if isinstance(v, Additive):
            for w in v.weights:
                if w > best:
                    best = w
            continue
        check_budget(len(v.table) * inst.items, limit, "marginal utility enumeration")
        for mask, base in enumerate(v.table):
            for j in range(inst.items):
                if not mask >> j & 1:
                    gain = v.table[mask | (1 << j)] - base
                    if gain > best:
                        best = gain
    return best


def min_max_vcg(inst: FairnessInstance, limit: int | None = None) -> tuple:
    """Allocation of least total cost (first in lexicographic order)."""
    best = None
    for alloc in all_item_allocations(inst, limit):
        total = ZERO
        for x in player_values(inst, alloc):
            total = total + x
        if best is None or total < best[0]:
            best = (total, alloc)
    return best[1]


def random_additive_instance(rng: random.Random, players: int, items: int, high: int = 10) -> FairnessInstance:
    return FairnessInstance.additive([[rng.randint(0, high) for _ in range(items)] for _ in range(players)])


# ---------------------------------------------------------------------------
# Impossibility demonstrations on two-profile domains


def _alloc_json(alloc: Sequence[int]) -> list[list[int]]:
    return bundles(alloc, 2)


@dataclass
class MaxMinDemo:
    c: Fraction
    eps: Fraction
    optimum: tuple  # Max-Min optimum of each profile
    pairs: list  # every (first, second) allocation pair with diagnostics
    qualifying: list  # pairs where both allocations are c-approximations
    admissible: list  # qualifying pairs that also pass the monotonicity filter

    @property
    def all_qualifying_violate(self) -> bool:
        return bool(self.qualifying) and all(not p["wmon_holds"] for p in self.qualifying)

    def best_wmon_ratio(self) -> Scalar:
        """Least worst-case ratio OPT/ALG over pairs that are weakly monotone for player 2."""
        ratios = [max(p["ratios"]) for p in self.pairs if p["wmon_holds"]]
        return min(ratios)

    def to_json(self) -> dict:
        return {
            "c": str(self.c),
            "epsilon": str(self.eps),
            "qualifying_pairs": len(self.qualifying),
            "violations": [
                {
                    "first": _alloc_json(p["first"]),
                    "second": _alloc_json(p["second"]),
                    "lhs": str(p["lhs"]),
                    "rhs": str(p["rhs"]),
                }
                for p in self.qualifying
                if not p["wmon_holds"]
            ],
        }


def max_min_instances(c: Any, eps: Any) -> tuple[FairnessInstance, FairnessInstance]:
    """Two items a, b; player 2 switches from ``v2`` to ``v2'`` between the instances."""
    c, eps = Fraction(c), Fraction(eps)
    if c < 1:
        raise ValueError("the approximation factor c must be at least 1")
    if not (0 < eps < Fraction(1, 2) and eps <= 1 / c**2):
        raise ValueError("need 0 < epsilon < 1/2 and epsilon <= 1/c^2")
    v1 = [2, 1 / c]
    first = FairnessInstance.additive([v1, [4 - eps, 1 + eps]])
    second = FairnessInstance.additive([v1, [1 / c, 1 / c**2 - eps]])
    return first, second


def max_min_impossibility_demo(c: Any, eps: Any, wmon: bool = True) -> MaxMinDemo:
    """Every pair of c-approximate allocations breaks weak monotonicity for player 2."""
    first, second = max_min_instances(c, eps)
    opt = (max_min_value(first)[0], max_min_value(second)[0])
    c = Fraction(c)
    allocs = list(all_item_allocations(first))
    v2, v2_dev = first.valuations[1], second.valuations[1]
    pairs = []
    for a, b in itertools.product(allocs, allocs):
        alg = (min(player_values(first, a)), min(player_values(second, b)))
        ratios = tuple(INF if x == 0 else o / x for o, x in zip(opt, alg))
        lhs, rhs = wmon_sides(v2, v2_dev, a, b)
        holds = a == b or lhs >= rhs
        pairs.append(
            {
                "first": a,
                "second": b,
                "ratios": ratios,
                "c_approx": all(r <= c for r in ratios),
                "lhs": lhs,
                "rhs": rhs,
                "wmon_holds": holds,
            }
        )
    qualifying = [p for p in pairs if p["c_approx"]]
    admissible = [p for p in qualifying if p["wmon_holds"] or not wmon]
    return MaxMinDemo(c, Fraction(eps), opt, pairs, qualifying, admissible)


@dataclass
class EnvyDemo:
    eps: Fraction
    alpha: tuple  # before, after the change
    optimum: tuple  # minimum envy before, after
    forced: tuple  # allocation after the change for the case "player 1 holds items 1, 2"
    final_envy: Scalar
    per_rule: list  # for every first allocation: envy there and the monotone follow-ups

    def to_json(self) -> dict:
        return {
            "epsilon": str(self.eps),
            "alpha": [str(x) for x in self.alpha],
            "min_envy": [str(x) for x in self.optimum],
            "forced_allocation": _alloc_json(self.forced),
            "final_envy": str(self.final_envy),
        }


def envy_instances(eps: Any) -> tuple[FairnessInstance, FairnessInstance]:
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise ValueError("need 0 < epsilon < 1")
    before = FairnessInstance.additive([[1, 1, 1], [1, 1, 1]])
    after = FairnessInstance.additive([[1 + eps, 1 + eps, eps], [1, 1, 1]])
    return before, after


def envy_bound_demo(eps: Any = Fraction(1, 100)) -> EnvyDemo:
    """Player 1 changes valuation; weak monotonicity pins the allocation when it held items 1 and 2."""
    before, after = envy_instances(eps)
    v1, v1_dev = before.valuations[0], after.valuations[0]
    allocs = list(all_item_allocations(before))
    per_rule = []
    for a in allocs:
        follow = []
        for b in allocs:
            lhs, rhs = wmon_sides(v1, v1_dev, a, b)
            if a == b or lhs >= rhs:
                follow.append(b)
        per_rule.append(
            {
                "first": a,
                "envy_first": envy(before, a),
                "monotone_second": follow,
                "envy_second": [envy(after, b) for b in follow],
            }
        )
    case = next(r for r in per_rule if r["first"] == (0, 0, 1))
    if len(case["monotone_second"]) != 1:
        raise AssertionError("monotonicity no longer pins the allocation")
    forced = case["monotone_second"][0]
    return EnvyDemo(
        Fraction(eps),
        (max_marginal_utility(before), max_marginal_utility(after)),
        (min_envy(before)[0], min_envy(after)[0]),
        forced,
        envy(after, forced),
        per_rule,
    )

