"""Reading instance and type-domain files."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .core import Additive, TypeDomain, parse_scalar
from .fairness import FairnessInstance
from .routing import RoutingInstance
from .scheduling import SchedulingInstance


def read_json(path: str | Path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def instance_from_json(obj: dict):
    kind = obj.get("type")
    if kind == "scheduling":
        return SchedulingInstance.from_json(obj)
    if kind == "routing":
        return RoutingInstance.from_json(obj)
    if kind == "fairness":
        return FairnessInstance.from_json(obj)
    raise ValueError(f"unknown instance type {kind!r}")


def load_instance(path: str | Path):
    return instance_from_json(read_json(path))


def domain_from_json(obj: dict) -> TypeDomain:
    """``{"type": "domain", "players": [{"name": [cost per task], ...}, ...]}``.

    Every valuation is additive over tasks; names keep their file order.
    """
    if obj.get("type") != "domain":
        raise ValueError("not a type-domain file")
    players = obj.get("players")
    if not isinstance(players, list) or not players:
        raise ValueError("a domain needs a non-empty 'players' list")
    tasks = None
    types = []
    for i, table in enumerate(players):
        if not isinstance(table, dict) or not table:
            raise ValueError(f"player {i}: expected a non-empty mapping of named cost vectors")
        named = {}
        for name, costs in table.items():
            if tasks is None:
                tasks = len(costs)
            if len(costs) != tasks:
                raise ValueError(f"player {i}, type {name!r}: expected {tasks} costs")
            named[name] = Additive(i, tuple(parse_scalar(c) for c in costs))
        types.append(named)
    return TypeDomain(types)


def domain_to_json(domain: TypeDomain) -> dict:
    return {
        "type": "domain",
        "players": [
            {name: [w.to_json() for w in domain.valuation(i, name).weights] for name in domain.names(i)}
            for i in range(domain.players)
        ],
    }


def load_domain(path: str | Path) -> TypeDomain:
    return domain_from_json(read_json(path))
