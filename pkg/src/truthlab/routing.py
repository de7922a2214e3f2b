"""Confluent routing trees into a single destination.

Every node other than the destination picks one next hop.  A node's workload
is the number of packets it forwards (its own included) times the per-packet
cost it pays on the chosen outgoing link.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence

from .core import PHI, ZERO, MechanismOutcome, Scalar, check_budget, parse_rational, parse_scalar
from .monotonicity import Direction, wmon_pair_holds


@dataclass(frozen=True)
class RoutingInstance:
    nodes: tuple[str, ...]
    dest: str
    edges: tuple[tuple[str, str, Scalar], ...]  # (from, to, cost paid by `from` per packet)
    traffic: tuple[tuple[str, Fraction], ...]

    def __post_init__(self) -> None:
        nodes = tuple(self.nodes)
        if len(set(nodes)) != len(nodes):
            raise ValueError("duplicate node names")
        if self.dest not in nodes:
            raise ValueError(f"destination {self.dest!r} is not a node")
        seen = set()
        edges = []
        for u, v, c in self.edges:
            c = Scalar.coerce(c)
            if u not in nodes or v not in nodes:
                raise ValueError(f"edge ({u}, {v}) uses an unknown node")
            if u == v or (u, v) in seen:
                raise ValueError(f"bad or duplicate edge ({u}, {v})")
            if u == self.dest:
                raise ValueError("the destination has no outgoing links")
            if c < 0 or not c.is_finite():
                raise ValueError(f"edge cost must be finite and non-negative, got {c}")
            seen.add((u, v))
            edges.append((u, v, c))
        order = {n: k for k, n in enumerate(nodes)}
        edges.sort(key=lambda e: (order[e[0]], order[e[1]]))
        traffic = dict((k, Fraction(t)) for k, t in dict(self.traffic).items())
        for k, t in traffic.items():
            if k not in nodes:
                raise ValueError(f"traffic for unknown node {k!r}")
            if t < 0:
                raise ValueError("traffic must be non-negative")
        if traffic.get(self.dest, 0) != 0:
            raise ValueError("the destination originates no traffic")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(
            self, "traffic", tuple((n, traffic.get(n, Fraction(0))) for n in nodes if n != self.dest)
        )
        reach = {self.dest}
        grew = True
        while grew:
            grew = False
            for u, v, _ in edges:
                if v in reach and u not in reach:
                    reach.add(u)
                    grew = True
        stuck = [n for n in nodes if n not in reach]
        if stuck:
            raise ValueError(f"nodes without a path to the destination: {stuck}")

    @classmethod
    def build(cls, nodes: Sequence[str], dest: str, edges: dict, traffic: dict | None = None) -> RoutingInstance:
        """``edges`` maps ``(u, v)`` to the cost; traffic defaults to one packet per source."""
        traffic = {n: 1 for n in nodes if n != dest} if traffic is None else traffic
        return cls(tuple(nodes), dest, tuple((u, v, c) for (u, v), c in edges.items()), tuple(traffic.items()))

    @classmethod
    def single_dimensional(
        cls, nodes: Sequence[str], dest: str, links: Iterable[tuple[str, str]], node_cost: dict, traffic: dict | None = None
    ) -> RoutingInstance:
        """Every outgoing link of a node carries that node's single cost."""
        return cls.build(nodes, dest, {(u, v): node_cost[u] for u, v in links}, traffic)

    @property
    def sources(self) -> tuple[str, ...]:
        return tuple(n for n in self.nodes if n != self.dest)

    def cost(self, u: str, v: str) -> Scalar:
        for a, b, c in self.edges:
            if a == u and b == v:
                return c
        raise KeyError((u, v))

    def out_links(self, u: str) -> list[str]:
        return [b for a, b, _ in self.edges if a == u]

    def traffic_of(self, u: str) -> Fraction:
        return dict(self.traffic).get(u, Fraction(0))

    def is_single_dimensional(self) -> bool:
        return all(len({c for a, _, c in self.edges if a == u}) <= 1 for u in self.sources)

    def node_cost(self, u: str) -> Scalar:
        costs = {c for a, _, c in self.edges if a == u}
        if len(costs) != 1:
            raise ValueError(f"node {u} does not have a single cost")
        return costs.pop()

    def with_node_cost(self, u: str, cost: Any) -> RoutingInstance:
        edges = tuple((a, b, cost if a == u else c) for a, b, c in self.edges)
        return RoutingInstance(self.nodes, self.dest, edges, self.traffic)

    def to_json(self) -> dict:
        return {
            "type": "routing",
            "nodes": list(self.nodes),
            "dest": self.dest,
            "edges": [{"from": u, "to": v, "cost": c.to_json()} for u, v, c in self.edges],
            "traffic": {n: _rational_json(t) for n, t in self.traffic},
        }

    @classmethod
    def from_json(cls, obj: dict) -> RoutingInstance:
        if obj.get("type", "routing") != "routing":
            raise ValueError(f"not a routing instance: {obj.get('type')!r}")
        edges = tuple((e["from"], e["to"], parse_scalar(e["cost"])) for e in obj["edges"])
        traffic = {k: parse_rational(v) for k, v in obj.get("traffic", {}).items()}
        return cls(tuple(obj["nodes"]), obj["dest"], edges, tuple(traffic.items()))


def _rational_json(q: Fraction) -> Any:
    return q.numerator if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class RoutingTree:
    nexthop: tuple[tuple[str, str], ...]

    @classmethod
    def of(cls, hops: dict) -> RoutingTree:
        return cls(tuple(hops.items()))

    def hop(self, u: str) -> str:
        return dict(self.nexthop)[u]

    def as_dict(self) -> dict:
        return dict(self.nexthop)

    def to_json(self) -> dict:
        return {"nexthop": dict(self.nexthop)}

    @classmethod
    def from_json(cls, obj: dict) -> RoutingTree:
        return cls(tuple(obj["nexthop"].items()))


def validate_tree(inst: RoutingInstance, tree: RoutingTree) -> None:
    hops = tree.as_dict()
    if set(hops) != set(inst.sources):
        raise ValueError("a routing tree needs exactly one next hop per source")
    links = {(u, v) for u, v, _ in inst.edges}
    for u, v in hops.items():
        if (u, v) not in links:
            raise ValueError(f"({u}, {v}) is not a link")
    for u in inst.sources:
        path = {u}
        while u != inst.dest:
            u = hops[u]
            if u in path:
                raise ValueError("routing tree contains a cycle")
            path.add(u)


def _paths(inst: RoutingInstance, hops: dict) -> dict[str, list[str]]:
    paths = {}
    for s in inst.sources:
        path, u = [], s
        while u != inst.dest:
            path.append(u)
            u = hops[u]
        paths[s] = path
    return paths


def packets_through(inst: RoutingInstance, tree: RoutingTree) -> dict[str, Fraction]:
    """Packets forwarded by each source, its own traffic included."""
    validate_tree(inst, tree)
    count = {s: Fraction(0) for s in inst.sources}
    for s, path in _paths(inst, tree.as_dict()).items():
        t = inst.traffic_of(s)
        for u in path:
            count[u] += t
    return count


def workloads(inst: RoutingInstance, tree: RoutingTree) -> dict[str, Scalar]:
    hops = tree.as_dict()
    return {u: inst.cost(u, hops[u]) * k for u, k in packets_through(inst, tree).items()}


def workload(inst: RoutingInstance, tree: RoutingTree) -> Scalar:
    return max(workloads(inst, tree).values(), default=ZERO)


def total_cost(inst: RoutingInstance, tree: RoutingTree) -> Scalar:
    total = ZERO
    for w in workloads(inst, tree).values():
        total = total + w
    return total


def enumerate_trees(inst: RoutingInstance, limit: int | None = None) -> list[RoutingTree]:
    """All confluent trees, ordered lexicographically by next-hop vector (node order)."""
    sources = inst.sources
    options = [inst.out_links(u) for u in sources]
    count = 1
    for o in options:
        count *= len(o)
    check_budget(count, limit, "routing tree enumeration")
    trees = []
    for choice in itertools.product(*options):
        hops = dict(zip(sources, choice))
        if _acyclic(hops, inst.dest):
            trees.append(RoutingTree(tuple(hops.items())))
    return trees


def _acyclic(hops: dict, dest: str) -> bool:
    done = {dest}
    for s in hops:
        path, u = set(), s
        while u not in done:
            if u in path:
                return False
            path.add(u)
            u = hops[u]
        done |= path
    return True


def optimal_workload_tree(inst: RoutingInstance, limit: int | None = None) -> tuple[Scalar, RoutingTree]:
    best = None
    for tree in enumerate_trees(inst, limit):
        w = workload(inst, tree)
        if best is None or w < best[0]:
            best = (w, tree)
    return best


def cost_min_tree(inst: RoutingInstance, limit: int | None = None) -> tuple[RoutingTree, MechanismOutcome]:
    """Total-cost minimizing tree with Clarke pivot payments (one per source, in node order).

    A source is paid the best achievable cost of the others minus their cost
    in the chosen tree, which makes reporting true link costs dominant.
    """
    trees = enumerate_trees(inst, limit)
    loads = [workloads(inst, t) for t in trees]
    totals = [sum(w.values(), ZERO) for w in loads]
    best = min(range(len(trees)), key=lambda k: (totals[k], k))
    payments = []
    for u in inst.sources:
        others = [totals[k] - loads[k][u] for k in range(len(trees))]
        payments.append(min(others) - others[best])
    return trees[best], MechanismOutcome(trees[best], tuple(payments))


def _lex_select(packets: Sequence[Sequence[Any]], costs: Sequence[Any]) -> int:
    """Index of the tree whose workloads, sorted decreasingly, are lexicographically least.

    ``packets[k][i]`` is the traffic through source ``i`` in tree ``k`` and
    ``costs[i]`` its per-packet cost.  Remaining ties go to the lowest index.
    """
    best_key, best = None, -1
    for k, row in enumerate(packets):
        key = sorted((p * c for p, c in zip(row, costs)), reverse=True)
        if best_key is None or key < best_key:
            best_key, best = key, k
    return best


def lex_optimal_mechanism(inst: RoutingInstance, limit: int | None = None) -> RoutingTree:
    """Workload-optimal tree with the lexicographically least sorted workload vector.

    Ties are broken by the next-hop vector in node order.
    """
    if not inst.is_single_dimensional():
        raise ValueError("the lexicographic mechanism needs single-dimensional costs")
    trees = enumerate_trees(inst, limit)
    sources = inst.sources
    packets = []
    for t in trees:
        through = packets_through(inst, t)
        packets.append([through[u] for u in sources])
    costs = [inst.node_cost(u) for u in sources]
    return trees[_lex_select(packets, costs)]


# ---------------------------------------------------------------------------
# Named instances


def _check_eps(eps: Any) -> Fraction:
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError(f"epsilon must be positive, got {eps}")
    return eps


def relay_star_instance(eps: Any = Fraction(1, 100)) -> RoutingInstance:
    """Hub ``x`` with a unit link to ``d``; ``y`` and ``z`` reach ``x`` for free or ``d`` at 1+eps."""
    return k_star(3, eps)


def k_star(k: int, eps: Any = Fraction(1, 100)) -> RoutingInstance:
    """Hub ``x`` plus ``k-1`` leaves; every source sends one packet."""
    eps = _check_eps(eps)
    if k < 2:
        raise ValueError("need at least two sources")
    leaves = ["y", "z"] if k == 3 else [f"y{i}" for i in range(1, k)]
    nodes = ["x"] + leaves + ["d"]
    edges: dict = {("x", "d"): 1}
    for leaf in leaves:
        edges[(leaf, "x")] = 0
        edges[(leaf, "d")] = 1 + eps
    return RoutingInstance.build(nodes, "d", edges)


def relay_star_single_dimensional(eps: Any = Fraction(1, 100)) -> RoutingInstance:
    """The relay star with one cost per node: each leaf reaches ``d`` through a relay that originates nothing."""
    eps = _check_eps(eps)
    nodes = ["x", "y", "z", "y'", "z'", "d"]
    links = [("x", "d"), ("y", "x"), ("y", "y'"), ("y'", "d"), ("z", "x"), ("z", "z'"), ("z'", "d")]
    node_cost = {"x": 1, "y": 0, "z": 0, "y'": 1 + eps, "z'": 1 + eps}
    traffic = {"x": 1, "y": 1, "z": 1, "y'": 0, "z'": 0}
    return RoutingInstance.single_dimensional(nodes, "d", links, node_cost, traffic)


def phi_instance() -> RoutingInstance:
    return RoutingInstance.build(
        ["I", "II", "III", "d"],
        "d",
        {("I", "II"): 1, ("I", "III"): 0, ("II", "d"): Fraction(1, 2), ("III", "d"): PHI / 2},
    )


def phi_raised_instance(eps: Any = Fraction(1, 100)) -> RoutingInstance:
    """The phi instance after node I raises its link costs to phi^2 - eps and phi."""
    eps = _check_eps(eps)
    return RoutingInstance.build(
        ["I", "II", "III", "d"],
        "d",
        {("I", "II"): PHI * PHI - eps, ("I", "III"): PHI, ("II", "d"): Fraction(1, 2), ("III", "d"): PHI / 2},
    )


# ---------------------------------------------------------------------------
# Lower bounds for mechanisms that are weakly monotone in node I


@dataclass
class RoutingBounds:
    worst_case: Scalar
    randomized: Scalar
    worst_pair: tuple
    randomized_pair: tuple
    delta_worst: Scalar
    delta_randomized: Scalar


def routing_wmon_bounds(eps: Any = Fraction(1, 100), wmon: bool = True) -> RoutingBounds:
    """Best worst-case and best 50/50 expected ratio over tree pairs for the two instances.

    A pair (tree on the phi instance, tree on the raised instance) is
    admissible when node I's workloads satisfy weak monotonicity in the cost
    direction.
    """
    eps = _check_eps(eps)
    if eps >= 1:
        raise ValueError("epsilon must be below 1 so that routing via II stays optimal after the change")
    ins, ins2 = phi_instance(), phi_raised_instance(eps)
    trees = enumerate_trees(ins)
    opt, opt2 = optimal_workload_tree(ins)[0], optimal_workload_tree(ins2)[0]

    def load_i(inst, tree):
        return workloads(inst, tree)["I"]

    best_w = best_r = None
    for a, b in itertools.product(trees, trees):
        if wmon and not wmon_pair_holds(
            lambda t: load_i(ins, t), lambda t: load_i(ins2, t), a, b, Direction.COST
        ):
            continue
        r1, r2 = workload(ins, a) / opt, workload(ins2, b) / opt2
        worst = max(r1, r2)
        mean = (r1 + r2) / 2
        if best_w is None or worst < best_w[0]:
            best_w = (worst, (a, b))
        if best_r is None or mean < best_r[0]:
            best_r = (mean, (a, b))
    delta = Scalar(eps) / opt2
    return RoutingBounds(best_w[0], best_r[0], best_w[1], best_r[1], delta, delta / 2)


# ---------------------------------------------------------------------------
# Single-dimensional monotonicity sweep


def small_topologies(max_out: int = 2) -> list[tuple[tuple[str, str], ...]]:
    """Link sets on sources a, b, c and destination d with out-degree 1..max_out, all reaching d."""
    sources, dest = ("a", "b", "c"), "d"
    per_node = []
    for u in sources:
        targets = [v for v in sources + (dest,) if v != u]
        subsets = [s for k in range(1, max_out + 1) for s in itertools.combinations(targets, k)]
        per_node.append([tuple((u, v) for v in s) for s in subsets])
    result = []
    for combo in itertools.product(*per_node):
        links = tuple(l for group in combo for l in group)
        try:
            RoutingInstance.single_dimensional(sources + (dest,), dest, links, dict.fromkeys(sources, 1))
        except ValueError:
            continue
        result.append(links)
    return result


@dataclass
class SweepResult:
    topologies: int
    selections: int
    violations: list  # dicts: links, node, costs, c_low, c_high, packets_low, packets_high


def lex_monotonicity_sweep(grid: Sequence[Any] | None = None, topologies=None, scale: int = 4) -> SweepResult:
    """Check that raising one node's cost never routes more traffic through it.

    Costs are integers on the scaled grid so the inner loop avoids exact
    scalar arithmetic; the selection rule is shared with
    :func:`lex_optimal_mechanism`.  Checking consecutive grid points is
    enough because non-increase is transitive.
    """
    grid = [Fraction(k, scale) for k in range(4 * scale + 1)] if grid is None else [Fraction(g) for g in grid]
    grid = sorted(set(grid))
    ints = [int(g * scale) for g in grid]
    if any(Fraction(i, scale) != g for i, g in zip(ints, grid)):
        raise ValueError("grid points must be multiples of 1/scale")
    topologies = small_topologies() if topologies is None else topologies
    sources = ("a", "b", "c")
    violations = []
    selections = 0
    for links in topologies:
        inst = RoutingInstance.single_dimensional(sources + ("d",), "d", links, dict.fromkeys(sources, 1))
        trees = enumerate_trees(inst)
        packets = []
        for t in trees:
            through = packets_through(inst, t)
            packets.append([int(through[u]) for u in sources])
        chosen = {}
        for costs in itertools.product(range(len(ints)), repeat=3):
            chosen[costs] = packets[_lex_select(packets, [ints[k] for k in costs])]
            selections += 1
        for costs, row in chosen.items():
            for i in range(3):
                if costs[i] + 1 >= len(ints):
                    continue
                higher = costs[:i] + (costs[i] + 1,) + costs[i + 1 :]
                if chosen[higher][i] > row[i]:
                    violations.append(
                        {
                            "links": [list(l) for l in links],
                            "node": sources[i],
                            "costs": [str(grid[k]) for k in costs],
                            "c_low": str(grid[costs[i]]),
                            "c_high": str(grid[costs[i] + 1]),
                            "packets_low": row[i],
                            "packets_high": chosen[higher][i],
                        }
                    )
    return SweepResult(len(topologies), selections, violations)


def random_routing_instance(rng: random.Random, sources: int, max_cost: int = 5, max_traffic: int = 3) -> RoutingInstance:
    """Random multi-dimensional instance; a direct link to ``d`` is added when a node would be stranded."""
    nodes = [f"n{i}" for i in range(sources)] + ["d"]
    edges: dict = {}
    for u in nodes[:-1]:
        for v in nodes:
            if v != u and rng.random() < 0.5:
                edges[(u, v)] = rng.randint(0, max_cost)
    traffic = {u: rng.randint(0, max_traffic) for u in nodes[:-1]}
    while True:
        try:
            return RoutingInstance.build(nodes, "d", edges, traffic)
        except ValueError:
            reach = {"d"}
            grew = True
            while grew:
                grew = False
                for (u, v) in edges:
                    if v in reach and u not in reach:
                        reach.add(u)
                        grew = True
            stranded = next(u for u in nodes[:-1] if u not in reach)
            edges[(stranded, "d")] = rng.randint(0, max_cost)
