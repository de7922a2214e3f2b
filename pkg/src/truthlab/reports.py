"""Bound reproductions, property checks and single runs, packaged as reports.

A report compares an exactly computed value against a published bound with
one relation; the status follows from that comparison (plus any side
conditions recorded in the certificate) and nothing else.
"""
from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

from .core import PHI, Scalar, TypeDomain
from .fairness import (
    FairnessInstance,
    envy,
    envy_bound_demo,
    max_marginal_utility,
    max_min_impossibility_demo,
    max_min_value,
    min_envy,
    min_max_value,
    min_max_vcg,
    player_values,
    random_additive_instance,
)
from .lowerbounds import (
    bayes_case_rules,
    bayes_closing_expression,
    bayes_family,
    bic_feasible,
    expected_ratio,
    in_expectation_ratio_bound,
    instance_for,
    max_shared_marginal,
    min_expected_ratio_over_bic_rules,
    min_expected_ratio_over_wmon_rules,
    min_worst_ratio_over_wmon_rules,
    smon_adversary,
    two_machine_family,
    yao_closing_expression,
    yao_family,
)
from .monotonicity import (
    Direction,
    MarginalAssignment,
    check_ds_truthful,
    check_extended_wmon,
    check_smon,
    check_wmon,
    payments_exist,
)
from .routing import (
    RoutingInstance,
    cost_min_tree,
    relay_star_instance,
    lex_optimal_mechanism,
    optimal_workload_tree,
    random_routing_instance,
    routing_wmon_bounds,
    total_cost,
    workload,
)
from .scheduling import (
    SchedulingInstance,
    coin_sequences,
    collapse_to_two_machines,
    expected_makespan,
    makespan,
    min_work_vcg,
    nr_randomized,
    nr_sub_mechanism,
    nr_truthfulness_violations,
    optimal_makespan,
    random_instance,
)

CONFIRMED, VIOLATED, ERROR = "CONFIRMED", "VIOLATED", "ERROR"

BOUND_IDS = (
    "thm2",
    "thm3",
    "thm4",
    "thm5",
    "thm6",
    "nr-upper",
    "routing-n",
    "routing-phi",
    "routing-rand",
    "maxmin",
    "minmax-vcg",
    "envy",
)

DEFAULT_EPS = Fraction(1, 100)
DS_GRID = (0, 1, 3, 6, 11)


@dataclass
class Report:
    bound_id: str
    params: dict
    computed_value: Scalar | None = None
    paper_bound: Scalar | None = None
    relation: str = ""
    status: str = ERROR
    certificate: Any = None
    wall_ms: int = 0
    reason: str = ""
    extra_ok: bool = field(default=True, repr=False)

    def settle(self) -> Report:
        """Derive the status from the comparison and the side conditions."""
        if self.computed_value is None or self.paper_bound is None:
            self.status = CONFIRMED if self.extra_ok else VIOLATED
            return self
        ok = compare(self.computed_value, self.relation, self.paper_bound)
        self.status = CONFIRMED if ok and self.extra_ok else VIOLATED
        return self

    def to_json(self, timing: bool = False) -> dict:
        out = {
            "bound_id": self.bound_id,
            "params": {k: str(v) for k, v in self.params.items()},
            "computed_value": None if self.computed_value is None else str(self.computed_value),
            "paper_bound": None if self.paper_bound is None else str(self.paper_bound),
            "relation": self.relation,
            "status": self.status,
            "certificate": self.certificate,
        }
        if self.reason:
            out["reason"] = self.reason
        if timing:
            out["wall_ms"] = self.wall_ms
        return out

    def csv_row(self, timing: bool = True) -> list[str]:
        return [
            self.bound_id,
            str(self.params.get("m", "")),
            str(self.params.get("epsilon", "")),
            "" if self.computed_value is None else str(self.computed_value),
            "" if self.paper_bound is None else str(self.paper_bound),
            self.status,
            str(self.wall_ms) if timing else "",
        ]


CSV_COLUMNS = ["bound_id", "m", "epsilon", "computed_value", "paper_bound", "status", "wall_ms"]


def compare(x: Scalar, relation: str, y: Scalar) -> bool:
    ops: dict[str, Callable[[Scalar, Scalar], bool]] = {
        ">=": lambda a, b: a >= b,
        ">": lambda a, b: a > b,
        "<=": lambda a, b: a <= b,
        "<": lambda a, b: a < b,
        "==": lambda a, b: a == b,
    }
    return ops[relation](x, y)


def _rule_json(rule: dict) -> list:
    return [{"profile": list(p), "allocation": list(a)} for p, a in rule.items()]


def _violations_json(vs) -> list:
    return [v.to_json() for v in vs]


# ---------------------------------------------------------------------------
# Reproductions


def _thm2(p: dict) -> Report:
    eps = p["epsilon"]
    fam = two_machine_family(eps)
    res = min_worst_ratio_over_wmon_rules(fam)
    leftover = check_wmon(res.certificate, fam.domain, Direction.COST)
    rep = Report("thm2", p, res.value, Scalar(2 / (1 + eps)), ">=")
    rep.extra_ok = not leftover
    rep.certificate = {"rule": _rule_json(res.certificate), "certificate_violations": len(leftover)}
    return rep


def _thm3(p: dict) -> Report:
    m = p["m"]
    run = smon_adversary(lambda inst: min_work_vcg(inst)[0], m)
    rep = Report("thm3", p, run.ratio, Scalar(m), ">=")
    rep.extra_ok = run.optimum == 1
    rep.certificate = {
        "instance": run.instance.to_json(),
        "allocation": list(run.allocation),
        "optimum": str(run.optimum),
        "heavy_machine": run.heavy_machine,
        "smon_witnesses": run.witnesses,
    }
    return rep


def _thm4(p: dict) -> Report:
    m, eps = p["m"], p["epsilon"]
    fam = yao_family(m, eps)
    res = min_expected_ratio_over_wmon_rules(fam)
    leftover = check_wmon(res.certificate, fam.domain, Direction.COST, profiles=fam.profiles)
    recomputed = expected_ratio(fam, res.certificate)
    rep = Report("thm4", p, res.value, yao_closing_expression(m, eps), ">=")
    rep.extra_ok = not leftover and recomputed == res.value
    rep.certificate = {"rule": _rule_json(res.certificate), "certificate_violations": len(leftover)}
    return rep


def _thm5(p: dict) -> Report:
    m, eps = p["m"], p["epsilon"]
    bound = max_shared_marginal(m, eps)
    rep = Report("thm5", p, bound.value, Scalar(Fraction(1, m) + eps), "<=")
    rep.certificate = {
        "optimal_marginals": {k: str(v) for k, v in bound.vertex.items()},
        "forced_expected_ratio": str(in_expectation_ratio_bound(m, eps)),
    }
    return rep


def _thm6(p: dict) -> Report:
    eps = p["epsilon"]
    fam = bayes_family(eps, p["m"])
    res = min_expected_ratio_over_bic_rules(fam)
    cases = {name: bic_feasible(fam, rule) for name, rule in bayes_case_rules(fam).items()}
    rep = Report("thm6", p, res.value, bayes_closing_expression(eps), ">=")
    rep.extra_ok = bic_feasible(fam, res.certificate) and not any(cases.values())
    rep.certificate = {"rule": _rule_json(res.certificate), "case_rules_feasible": cases}
    return rep


def nr_guarantee(m: int) -> Fraction:
    """7m/8 for even m; with the extra machine in the first group, 7/4 times its size."""
    return Fraction(7, 8) * m if m % 2 == 0 else Fraction(7, 4) * ((m + 1) // 2)


def nr_suite(m: int, count: int, seed: int, max_tasks: int = 6) -> dict:
    """Worst expected ratio, truthfulness and group-collapse checks over seeded random instances."""
    rng = random.Random(seed)
    worst = None
    ds_failures = []
    collapse_failures = []
    for k in range(count):
        n = rng.randint(1, max_tasks)
        inst = random_instance(rng, m, n)
        dist = nr_randomized(inst)
        ratio = expected_makespan(inst, dist) / optimal_makespan(inst)[0]
        if worst is None or ratio > worst[0]:
            worst = (ratio, k)
        if nr_truthfulness_violations(inst, DS_GRID):
            ds_failures.append(k)
        collapsed = collapse_to_two_machines(inst)
        for coins in coin_sequences(n):
            a = makespan(inst, nr_sub_mechanism(inst, coins)[0])
            b = makespan(collapsed, nr_sub_mechanism(collapsed, coins)[0])
            if a > b:
                collapse_failures.append(k)
                break
    return {"worst": worst, "ds_failures": ds_failures, "collapse_failures": collapse_failures}


def _nr_upper(p: dict) -> Report:
    m = p["m"]
    suite = nr_suite(m, p["instances"], p["seed"])
    rep = Report("nr-upper", p, suite["worst"][0], Scalar(nr_guarantee(m)), "<=")
    rep.extra_ok = not suite["ds_failures"] and not suite["collapse_failures"]
    rep.certificate = {
        "worst_instance_index": suite["worst"][1],
        "ds_failures": suite["ds_failures"],
        "collapse_failures": suite["collapse_failures"],
    }
    return rep


def routing_suite(count: int, seed: int, max_sources: int = 5) -> list[int]:
    """Indices of random instances where the cost-minimizing tree exceeds n times the optimum."""
    rng = random.Random(seed)
    bad = []
    for k in range(count):
        inst = random_routing_instance(rng, rng.randint(1, max_sources))
        tree, _ = cost_min_tree(inst)
        opt = optimal_workload_tree(inst)[0]
        if workload(inst, tree) > opt * len(inst.sources):
            bad.append(k)
    return bad


def _routing_n(p: dict) -> Report:
    eps = p["epsilon"]
    inst = relay_star_instance(eps)
    tree, _ = cost_min_tree(inst)
    ratio = workload(inst, tree) / optimal_workload_tree(inst)[0]
    bad = routing_suite(p["instances"], p["seed"])
    rep = Report("routing-n", p, ratio, Scalar(len(inst.sources)), "<=")
    rep.extra_ok = ratio == Scalar(3 / (1 + eps)) and not bad
    rep.certificate = {
        "relay_star_tree": tree.to_json(),
        "relay_star_total_cost": str(total_cost(inst, tree)),
        "random_failures": bad,
    }
    return rep


def _routing(p: dict, randomized: bool) -> Report:
    b = routing_wmon_bounds(p["epsilon"])
    if randomized:
        # (3 + sqrt5) / 4 = (1 + phi) / 2
        value, bound, pair = b.randomized, (PHI + 1) / 2 - b.delta_randomized, b.randomized_pair
    else:
        value, bound, pair = b.worst_case, PHI - b.delta_worst, b.worst_pair
    rep = Report("routing-rand" if randomized else "routing-phi", p, value, bound, ">=")
    rep.certificate = {"trees": [t.to_json() for t in pair]}
    return rep


def _maxmin(p: dict) -> Report:
    demo = max_min_impossibility_demo(p["c"], p["epsilon"])
    rep = Report("maxmin", p, demo.best_wmon_ratio(), Scalar(p["c"]), ">")
    rep.extra_ok = demo.all_qualifying_violate and not demo.admissible
    rep.certificate = demo.to_json()
    return rep


def minmax_suite(count: int, seed: int, max_players: int = 3, max_items: int = 5) -> tuple[Scalar, list[int]]:
    """Worst ratio of the least-total-cost allocation to the Min-Max optimum, and any failures."""
    rng = random.Random(seed)
    worst = Scalar(1)
    bad = []
    for k in range(count):
        n = rng.randint(1, max_players)
        inst = random_additive_instance(rng, n, rng.randint(1, max_items))
        got = max(player_values(inst, min_max_vcg(inst)))
        opt = min_max_value(inst)[0]
        if got > opt * n:
            bad.append(k)
        if opt != 0 and got / opt > worst:
            worst = got / opt
    return worst, bad


def _minmax_vcg(p: dict) -> Report:
    worst, bad = minmax_suite(p["instances"], p["seed"], p["players"])
    rep = Report("minmax-vcg", p, worst, Scalar(p["players"]), "<=")
    rep.extra_ok = not bad
    rep.certificate = {"failures": bad}
    return rep


def _envy(p: dict) -> Report:
    demo = envy_bound_demo(p["epsilon"])
    gap = demo.final_envy - demo.optimum[1]
    rep = Report("envy", p, gap, Scalar(1), ">=")
    rep.extra_ok = demo.alpha[1] == 1 + p["epsilon"]
    rep.certificate = demo.to_json()
    return rep


_DEFAULTS: dict[str, dict] = {
    "thm2": {"epsilon": DEFAULT_EPS},
    "thm3": {"m": 2},
    "thm4": {"m": 2, "epsilon": DEFAULT_EPS},
    "thm5": {"m": 2, "epsilon": DEFAULT_EPS},
    "thm6": {"m": 2, "epsilon": DEFAULT_EPS},
    "nr-upper": {"m": 2, "seed": 0, "instances": 200},
    "routing-n": {"epsilon": DEFAULT_EPS, "seed": 0, "instances": 200},
    "routing-phi": {"epsilon": DEFAULT_EPS},
    "routing-rand": {"epsilon": DEFAULT_EPS},
    "maxmin": {"c": 10, "epsilon": DEFAULT_EPS},
    "minmax-vcg": {"players": 3, "seed": 0, "instances": 500},
    "envy": {"epsilon": DEFAULT_EPS},
}

_RUNNERS: dict[str, Callable[[dict], Report]] = {
    "thm2": _thm2,
    "thm3": _thm3,
    "thm4": _thm4,
    "thm5": _thm5,
    "thm6": _thm6,
    "nr-upper": _nr_upper,
    "routing-n": _routing_n,
    "routing-phi": lambda p: _routing(p, False),
    "routing-rand": lambda p: _routing(p, True),
    "maxmin": _maxmin,
    "minmax-vcg": _minmax_vcg,
    "envy": _envy,
}


def bound_params(bound_id: str, **given: Any) -> dict:
    """Defaults for ``bound_id`` overridden by the non-``None`` values given."""
    if bound_id not in _DEFAULTS:
        raise KeyError(bound_id)
    params = dict(_DEFAULTS[bound_id])
    for key, value in given.items():
        if value is not None and key in params:
            params[key] = value
    if "epsilon" in params:
        params["epsilon"] = Fraction(params["epsilon"])
        if params["epsilon"] <= 0:
            raise ValueError("epsilon must be positive")
    if "c" in params:
        params["c"] = Fraction(params["c"])
    return params


def _timed(bound_id: str, params: dict, body: Callable[[], Report]) -> Report:
    start = time.perf_counter()
    try:
        rep = body().settle()
    except Exception as exc:  # reported, not raised: the harness keeps going
        rep = Report(bound_id, params, status=ERROR, reason=f"{type(exc).__name__}: {exc}")
    rep.wall_ms = int((time.perf_counter() - start) * 1000)
    return rep


def reproduce(bound_id: str, **given: Any) -> Report:
    if bound_id not in _RUNNERS:
        return Report(bound_id, {}, status=ERROR, reason=f"unknown bound id {bound_id!r}")
    try:
        params = bound_params(bound_id, **given)
    except (ValueError, ZeroDivisionError) as exc:
        return Report(bound_id, {k: v for k, v in given.items() if v is not None}, status=ERROR, reason=str(exc))
    return _timed(bound_id, params, lambda: _RUNNERS[bound_id](params))


# ---------------------------------------------------------------------------
# Property checks on a type domain


def _opt_rule(domain: TypeDomain):
    return lambda profile: optimal_makespan(instance_for(domain, profile))[1]


def _vcg_outcome(domain: TypeDomain):
    return lambda profile: min_work_vcg(instance_for(domain, profile))[1]


def _nr_marginals(domain: TypeDomain):
    def mech(profile):
        inst = instance_for(domain, profile)
        dist = nr_randomized(inst)
        return MarginalAssignment.from_distribution(((o[0], p) for o, p in dist), inst.m)

    return mech


MECHANISMS = ("minwork-vcg", "opt-lex", "nr-randomized", "costmin-tree", "lex-tree", "optimal-tree", "minmax-vcg", "maxmin-opt", "min-envy")
PROPERTIES = ("wmon", "smon", "ds", "payments-exist", "extended-wmon")


def check(mechanism: str, prop: str, domain: TypeDomain, domain_name: str = "") -> Report:
    params = {"mechanism": mechanism, "property": prop, "domain": domain_name}
    bid = f"check:{mechanism}:{prop}"

    def body() -> Report:
        if prop not in PROPERTIES:
            raise ValueError(f"unknown property {prop!r}")
        if mechanism == "minwork-vcg":
            outcome = _vcg_outcome(domain)
            rule = lambda profile: outcome(profile).alternative  # noqa: E731
        elif mechanism == "opt-lex":
            outcome, rule = None, _opt_rule(domain)
        elif mechanism == "nr-randomized":
            outcome, rule = None, None
        else:
            raise ValueError(f"mechanism {mechanism!r} cannot be checked on a scheduling domain")
        cert: Any
        if prop == "extended-wmon":
            marg = _nr_marginals(domain) if rule is None else (
                lambda profile: MarginalAssignment.from_distribution([(rule(profile), 1)], domain.players)
            )
            found = check_extended_wmon(marg, domain, Direction.COST)
            cert = _violations_json(found)
        elif rule is None:
            raise ValueError("the randomized mechanism is only checked for extended-wmon")
        elif prop == "wmon":
            found = check_wmon(rule, domain, Direction.COST)
            cert = _violations_json(found)
        elif prop == "smon":
            found = check_smon(rule, domain, Direction.COST)
            cert = _violations_json(found)
        elif prop == "ds":
            if outcome is None:
                raise ValueError(f"mechanism {mechanism!r} has no payments")
            found = check_ds_truthful(outcome, domain, Direction.COST)
            cert = _violations_json(found)
        else:
            feasible, _ = payments_exist(rule, domain, Direction.COST)
            found = [] if feasible else ["negative cycle"]
            cert = {"feasible": feasible}
        return Report(bid, params, Scalar(len(found)), Scalar(0), "==", certificate=cert)

    return _timed(bid, params, body)


# ---------------------------------------------------------------------------
# Single runs


def _outcome_json(outcome) -> dict:
    return {"payments": [str(x) for x in outcome.payments]}


def run(mechanism: str, instance: Any, coins: str | None = None, expected: bool = False, instance_name: str = "") -> Report:
    params: dict = {"mechanism": mechanism, "instance": instance_name}
    if coins is not None:
        params["coins"] = coins
    bid = f"run:{mechanism}"

    def body() -> Report:
        if isinstance(instance, SchedulingInstance):
            return _run_scheduling(mechanism, instance, coins, expected, bid, params)
        if isinstance(instance, RoutingInstance):
            return _run_routing(mechanism, instance, bid, params)
        if isinstance(instance, FairnessInstance):
            return _run_fairness(mechanism, instance, bid, params)
        raise ValueError("unsupported instance")

    return _timed(bid, params, body)


def _run_scheduling(mechanism, inst, coins, expected, bid, params) -> Report:
    if mechanism == "minwork-vcg":
        alloc, out = min_work_vcg(inst)
        cert = {"assignment": list(alloc), **_outcome_json(out)}
        value = makespan(inst, alloc)
    elif mechanism == "opt-lex":
        value, alloc = optimal_makespan(inst)
        cert = {"assignment": list(alloc)}
    elif mechanism == "nr-randomized":
        if coins is not None and not expected:
            bits = [int(ch) for ch in coins.strip()]
            if any(b not in (0, 1) for b in bits) or len(bits) != inst.n:
                raise ValueError(f"--coins needs {inst.n} binary digits")
            alloc, out = nr_sub_mechanism(inst, bits)
            cert = {"assignment": list(alloc), **_outcome_json(out)}
            value = makespan(inst, alloc)
        else:
            dist = nr_randomized(inst)
            value = expected_makespan(inst, dist)
            cert = {
                "outcomes": [
                    {"assignment": list(o[0]), "probability": str(p), **_outcome_json(o[1])} for o, p in dist
                ]
            }
    else:
        raise ValueError(f"mechanism {mechanism!r} does not run on scheduling instances")
    cert["makespan"] = str(value)
    return Report(bid, params, value, None, "", certificate=cert)


def _run_routing(mechanism, inst, bid, params) -> Report:
    if mechanism == "costmin-tree":
        tree, out = cost_min_tree(inst)
        cert = {**tree.to_json(), **_outcome_json(out)}
    elif mechanism == "lex-tree":
        tree = lex_optimal_mechanism(inst)
        cert = tree.to_json()
    elif mechanism == "optimal-tree":
        tree = optimal_workload_tree(inst)[1]
        cert = tree.to_json()
    else:
        raise ValueError(f"mechanism {mechanism!r} does not run on routing instances")
    value = workload(inst, tree)
    cert["workload"] = str(value)
    cert["total_cost"] = str(total_cost(inst, tree))
    return Report(bid, params, value, None, "", certificate=cert)


def _run_fairness(mechanism, inst, bid, params) -> Report:
    if mechanism == "minmax-vcg":
        alloc = min_max_vcg(inst)
        value = max(player_values(inst, alloc))
    elif mechanism == "maxmin-opt":
        value, alloc = max_min_value(inst)
    elif mechanism == "min-envy":
        value, alloc = min_envy(inst)
    else:
        raise ValueError(f"mechanism {mechanism!r} does not run on fairness instances")
    cert = {
        "assignment": list(alloc),
        "values": [str(x) for x in player_values(inst, alloc)],
        "envy": str(envy(inst, alloc)),
        "alpha": str(max_marginal_utility(inst)),
    }
    return Report(bid, params, value, None, "", certificate=cert)
