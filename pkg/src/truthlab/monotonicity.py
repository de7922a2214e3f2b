"""Incentive-compatibility checkers over finite type domains.

Valuations are callables ``alternative -> Scalar``.  A rule maps profiles
(tuples of valuation names, see :class:`~truthlab.core.TypeDomain`) to
alternatives; it may be a callable or a mapping.  Every checker takes an
explicit :class:`Direction`: value maximizing players use the inequalities as
written, cost minimizing players reverse them.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping, Sequence

from .core import (
    INF,
    ZERO,
    Distribution,
    MechanismOutcome,
    Profile,
    Scalar,
    TypeDomain,
    with_type,
)


class Direction(enum.Enum):
    VALUE = "value"  # players maximize value, pay the mechanism
    COST = "cost"  # players minimize cost, are paid by the mechanism


@dataclass(frozen=True)
class Violation:
    player: int
    profile: Profile
    deviation: Profile
    lhs: Scalar
    rhs: Scalar
    kind: str = "wmon"

    def to_json(self) -> dict:
        return {
            "player": self.player,
            "profile": list(self.profile),
            "deviation": list(self.deviation),
            "lhs": self.lhs.to_json(),
            "rhs": self.rhs.to_json(),
            "kind": self.kind,
        }


def _apply(rule: Any, profile: Profile) -> Any:
    if isinstance(rule, Mapping):
        return rule[profile]
    return rule(profile)


def _holds(lhs: Scalar, rhs: Scalar, direction: Direction, strict: bool = False) -> bool:
    if direction is Direction.VALUE:
        return lhs > rhs if strict else lhs >= rhs
    return lhs < rhs if strict else lhs <= rhs


def wmon_sides(v, v_dev, a, b) -> tuple[Scalar, Scalar]:
    """``(v(a) + v'(b), v'(a) + v(b))``."""
    return v(a) + v_dev(b), v_dev(a) + v(b)


def wmon_pair_holds(v, v_dev, a, b, direction: Direction) -> bool:
    """Weak monotonicity for one unilateral change from ``v`` (outcome ``a``) to ``v'`` (outcome ``b``)."""
    if a == b:
        return True
    lhs, rhs = wmon_sides(v, v_dev, a, b)
    return _holds(lhs, rhs, direction)


def smon_pair_holds(v, v_dev, a, b, direction: Direction) -> bool:
    if a == b:
        return True
    lhs, rhs = wmon_sides(v, v_dev, a, b)
    return _holds(lhs, rhs, direction, strict=True)


def _unordered_deviations(domain: TypeDomain, profiles: Iterable[Profile] | None):
    """Each unilateral pair once: the deviation's type comes later in the player's list."""
    allowed = None if profiles is None else set(profiles)
    for profile in domain.profiles():
        if allowed is not None and profile not in allowed:
            continue
        for player in range(domain.players):
            names = domain.names(player)
            start = names.index(profile[player])
            for name in names[start + 1 :]:
                dev = with_type(profile, player, name)
                if allowed is not None and dev not in allowed:
                    continue
                yield player, profile, dev


def _check_pairs(rule, domain, direction, strict, profiles=None) -> list[Violation]:
    report = []
    for player, profile, dev in _unordered_deviations(domain, profiles):
        a, b = _apply(rule, profile), _apply(rule, dev)
        if a == b:
            continue
        v = domain.valuation(player, profile[player])
        v_dev = domain.valuation(player, dev[player])
        lhs, rhs = wmon_sides(v, v_dev, a, b)
        if not _holds(lhs, rhs, direction, strict):
            report.append(Violation(player, profile, dev, lhs, rhs, "smon" if strict else "wmon"))
    return report


def check_wmon(rule, domain: TypeDomain, direction: Direction, profiles=None) -> list[Violation]:
    """All unilateral deviations violating weak monotonicity (each unordered pair once).

    ``profiles`` optionally restricts the check to a subset of the domain's
    profiles; the rule then only needs to be defined there.
    """
    return _check_pairs(rule, domain, direction, strict=False, profiles=profiles)


def check_smon(rule, domain: TypeDomain, direction: Direction, profiles=None) -> list[Violation]:
    """Like :func:`check_wmon` but a changed outcome needs a strict inequality."""
    return _check_pairs(rule, domain, direction, strict=True, profiles=profiles)


# ---------------------------------------------------------------------------
# Randomized mechanisms


def extended_valuation(v, dist: Distribution) -> Scalar:
    """Expected value of ``v`` under a distribution over alternatives."""
    total = ZERO
    for alt, p in dist:
        if p == 0:
            continue
        total = total + v(alt) * p
    return total


class MarginalAssignment:
    """``p[i][t]``: probability that machine (or player) ``i`` receives task ``t``."""

    __slots__ = ("p",)

    def __init__(self, rows: Sequence[Sequence[Any]]) -> None:
        p = tuple(tuple(Fraction(x) for x in row) for row in rows)
        if not p:
            raise ValueError("empty marginal matrix")
        n = len(p[0])
        for row in p:
            if len(row) != n:
                raise ValueError("marginal matrix is not rectangular")
            for x in row:
                if not 0 <= x <= 1:
                    raise ValueError(f"probability {x} outside [0, 1]")
        for t in range(n):
            total = sum(row[t] for row in p)
            if total != 1:
                raise ValueError(f"column {t} sums to {total}")
        object.__setattr__(self, "p", p)

    def __setattr__(self, name: str, value: Any) -> None:
        raise AttributeError("MarginalAssignment is immutable")

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MarginalAssignment) and self.p == other.p

    def __hash__(self) -> int:
        return hash(self.p)

    def __repr__(self) -> str:
        return f"MarginalAssignment({[[str(x) for x in row] for row in self.p]})"

    def __getitem__(self, index: tuple[int, int]) -> Fraction:
        i, t = index
        return self.p[i][t]

    @classmethod
    def from_distribution(cls, dist: Iterable[tuple[Any, Any]], m: int) -> MarginalAssignment:
        """Marginals of a distribution over allocations (owner per task)."""
        rows: list[list[Fraction]] | None = None
        for alloc, p in dist:
            if rows is None:
                rows = [[Fraction(0)] * len(alloc) for _ in range(m)]
            for t, owner in enumerate(alloc):
                rows[owner][t] += Fraction(p)
        if rows is None:
            raise ValueError("empty distribution")
        return cls(rows)


def marginal_value(weights: Sequence[Scalar], marginals: MarginalAssignment, player: int) -> Scalar:
    total = ZERO
    for t, w in enumerate(weights):
        p = marginals[player, t]
        if p:
            total = total + w * p
    return total


def check_extended_wmon(mech, domain: TypeDomain, direction: Direction) -> list[Violation]:
    """Extended weak monotonicity on marginal assignments.

    Only additive valuations (objects exposing ``player`` and ``weights``) are
    accepted, since only then is the expected value a function of the
    marginals.
    """
    for player in range(domain.players):
        for name in domain.names(player):
            v = domain.valuation(player, name)
            if not hasattr(v, "weights") or getattr(v, "player", None) != player:
                raise ValueError(f"valuation {name!r} of player {player} is not additive")
    report = []
    cache: dict[Profile, MarginalAssignment] = {}

    def marg(profile: Profile) -> MarginalAssignment:
        if profile not in cache:
            cache[profile] = _apply(mech, profile)
        return cache[profile]

    for player, profile, dev in _unordered_deviations(domain, None):
        P, Q = marg(profile), marg(dev)
        w = domain.valuation(player, profile[player]).weights
        w_dev = domain.valuation(player, dev[player]).weights
        lhs = marginal_value(w, P, player) + marginal_value(w_dev, Q, player)
        rhs = marginal_value(w_dev, P, player) + marginal_value(w, Q, player)
        if not _holds(lhs, rhs, direction):
            report.append(Violation(player, profile, dev, lhs, rhs, "extended-wmon"))
    return report


# ---------------------------------------------------------------------------
# Payments


def utility(v, outcome: MechanismOutcome, player: int, direction: Direction) -> Scalar:
    pay = outcome.payments[player]
    value = v(outcome.alternative)
    if direction is Direction.VALUE:
        return value - pay
    return pay - value


def check_ds_truthful(mech, domain: TypeDomain, direction: Direction) -> list[Violation]:
    """Dominant-strategy truthfulness of a mechanism returning :class:`MechanismOutcome`.

    Reports profitable misreports (``lhs`` truthful utility, ``rhs`` deviating
    utility) and, separately, cases where a player's payment for the same
    outcome depends on its own report (kind ``"payment"``).
    """
    report = []
    outcomes = {p: _apply(mech, p) for p in domain.profiles()}
    for profile, honest in outcomes.items():
        for player in range(domain.players):
            v = domain.valuation(player, profile[player])
            u_true = utility(v, honest, player, direction)
            for dev in domain.deviations(profile, player):
                lied = outcomes[dev]
                u_dev = utility(v, lied, player, direction)
                if u_dev > u_true:
                    report.append(Violation(player, profile, dev, u_true, u_dev, "ds"))
                if (
                    lied.alternative == honest.alternative
                    and lied.payments[player] != honest.payments[player]
                    and profile < dev
                ):
                    report.append(
                        Violation(player, profile, dev, honest.payments[player], lied.payments[player], "payment")
                    )
    return report


def _edge_weight(v_s, a_s, a_t, direction: Direction) -> Scalar | None:
    """Weight of the difference constraint ``p_t <= p_s + w`` (``None``: no constraint, ``-inf`` encoded as error)."""
    gain_s = v_s(a_s)
    gain_t = v_s(a_t)
    if direction is Direction.VALUE:
        # value: p_s - p_t <= v_s(a_s) - v_s(a_t)  ->  edge t -> s; callers swap roles
        hi, lo = gain_s, gain_t
    else:
        hi, lo = gain_t, gain_s
    if hi.infinite:
        return None
    if lo.infinite:
        raise _Infeasible
    return hi - lo


class _Infeasible(Exception):
    pass


def _shortest_potentials(types: list[str], edges: list[tuple[int, int, Scalar]]) -> list[Scalar] | None:
    """Bellman-Ford from a virtual source; ``None`` on a negative cycle."""
    dist = [ZERO] * len(types)
    for _ in range(len(types)):
        changed = False
        for u, v, w in edges:
            cand = dist[u] + w
            if cand < dist[v]:
                dist[v] = cand
                changed = True
        if not changed:
            return dist
    for u, v, w in edges:
        if dist[u] + w < dist[v]:
            return None
    return dist


def payments_exist(rule, domain: TypeDomain, direction: Direction) -> tuple[bool, dict | None]:
    """Decide whether truthful payments exist for a deterministic rule.

    For every player and every fixed report of the others, the player's types
    form a graph whose difference constraints are feasible exactly when there
    is no negative cycle (cycle monotonicity).  On success the returned dict
    maps each profile to a :class:`MechanismOutcome` with shortest-path
    payments.
    """
    profiles = domain.profiles()
    alt = {p: _apply(rule, p) for p in profiles}
    pay: dict[Profile, list[Scalar]] = {p: [ZERO] * domain.players for p in profiles}
    for player in range(domain.players):
        names = domain.names(player)
        others = {p[:player] + p[player + 1 :] for p in profiles}
        for rest in sorted(others):
            members = [rest[:player] + (name,) + rest[player:] for name in names]
            edges = []
            try:
                for s, ps in enumerate(members):
                    v_s = domain.valuation(player, names[s])
                    for t, pt in enumerate(members):
                        if s == t:
                            continue
                        w = _edge_weight(v_s, alt[ps], alt[pt], direction)
                        if w is None:
                            continue
                        if direction is Direction.VALUE:
                            edges.append((t, s, w))  # p_s <= p_t + w
                        else:
                            edges.append((s, t, w))  # p_t <= p_s + w
            except _Infeasible:
                return False, None
            potentials = _shortest_potentials(names, edges)
            if potentials is None:
                return False, None
            for k, member in enumerate(members):
                pay[member][player] = potentials[k]
    return True, {p: MechanismOutcome(alt[p], tuple(pay[p])) for p in profiles}


# ---------------------------------------------------------------------------
# Bayesian incentive compatibility


def _opponent_marginal(prior: Distribution, player: int) -> tuple[dict, dict]:
    own: dict[Any, Fraction] = {}
    rest: dict[Any, Fraction] = {}
    joint: dict[Any, Fraction] = {}
    for profile, p in prior:
        key = profile[:player] + profile[player + 1 :]
        own[profile[player]] = own.get(profile[player], Fraction(0)) + p
        rest[key] = rest.get(key, Fraction(0)) + p
        joint[profile] = joint.get(profile, Fraction(0)) + p
    for t, pt in own.items():
        for key, pk in rest.items():
            profile = key[:player] + (t,) + key[player:]
            if joint.get(profile, Fraction(0)) != pt * pk:
                raise ValueError("prior is not a product of the player's and opponents' marginals")
    return own, rest


def bayes_expectations(rule, domain: TypeDomain, prior: Distribution, player: int, type_a: str, type_b: str):
    """``E[v_x(f(y, .))]`` for ``x, y`` in ``{a, b}``, keyed by ``(x, y)``."""
    _, rest = _opponent_marginal(prior, player)
    va, vb = domain.valuation(player, type_a), domain.valuation(player, type_b)
    out = {}
    for x, vx in (("a", va), ("b", vb)):
        for y, ty in (("a", type_a), ("b", type_b)):
            total = ZERO
            for key, p in rest.items():
                if p == 0:
                    continue
                profile = key[:player] + (ty,) + key[player:]
                total = total + vx(_apply(rule, profile)) * p
            out[(x, y)] = total
    return out


def bayes_2cycle_feasible(
    rule, domain: TypeDomain, prior: Distribution, player: int, type_a: str, type_b: str, direction: Direction
) -> bool:
    """Summed pair of interim incentive constraints for a two-type player.

    With two types this condition is also sufficient for the existence of
    Bayesian incentive compatible payments.
    """
    if len(domain.names(player)) != 2:
        raise ValueError("Bayesian 2-cycle check needs exactly two types for the player")
    e = bayes_expectations(rule, domain, prior, player, type_a, type_b)
    lhs = e[("a", "a")] + e[("b", "b")]
    rhs = e[("b", "a")] + e[("a", "b")]
    return _holds(lhs, rhs, direction)


__all__ = [
    "Direction",
    "MarginalAssignment",
    "Violation",
    "bayes_2cycle_feasible",
    "bayes_expectations",
    "check_ds_truthful",
    "check_extended_wmon",
    "check_smon",
    "check_wmon",
    "extended_valuation",
    "marginal_value",
    "payments_exist",
    "smon_pair_holds",
    "utility",
    "wmon_pair_holds",
    "wmon_sides",
]
