"""Exact numbers in Q(sqrt 5), finite type domains, distributions and outcomes.

Every quantity in the library is a :class:`Scalar`: ``a + b*sqrt(5)`` with
rational ``a`` and ``b``, or the sentinel ``+inf``.  Comparisons are decided
exactly, so lower-bound reproductions never need a floating point tolerance.
"""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Generic, Iterable, Iterator, Sequence, TypeVar, Union

T = TypeVar("T")

Number = Union[int, Fraction, "Scalar"]

DEFAULT_BUDGET = 10**7


class BudgetExceeded(RuntimeError):
    """An exhaustive enumeration would exceed its configured budget."""


def budget(default: int = DEFAULT_BUDGET) -> int:
    """Enumeration budget; ``TRUTHLAB_BUDGET`` in the environment overrides it."""
    raw = os.environ.get("TRUTHLAB_BUDGET")
    if raw:
        value = int(raw)
        if value <= 0:
            raise ValueError("TRUTHLAB_BUDGET must be positive")
        return value
    return default


def check_budget(count: int, limit: int | None, what: str) -> None:
    limit = budget() if limit is None else limit
    if count > limit:
        raise BudgetExceeded(f"{what}: {count} candidates exceeds budget {limit}")


def _frac(x: Any) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot build an exact rational from {x!r}")


def _sign(q: Fraction) -> int:
    return (q > 0) - (q < 0)


class Scalar:
    """Exact ``a + b*sqrt(5)`` (``a``, ``b`` rational) or ``+inf``.

    Instances are immutable.  Arithmetic with ``int`` and ``Fraction`` operands
    is supported on both sides.  ``inf - inf``, ``0 * inf`` and negative
    infinity are rejected with ``ArithmeticError``.
    """

    __slots__ = ("a", "b", "infinite")

    a: Fraction
    b: Fraction
    infinite: bool

    def __init__(self, a: Any = 0, b: Any = 0, infinite: bool = False) -> None:
        if infinite:
            a = b = 0
        object.__setattr__(self, "a", _frac(a))
        object.__setattr__(self, "b", _frac(b))
        object.__setattr__(self, "infinite", bool(infinite))

    def __setattr__(self, name: str, value: Any) -> None:
        raise AttributeError("Scalar is immutable")

    @classmethod
    def _make(cls, a: Fraction, b: Fraction) -> Scalar:
        obj = object.__new__(cls)
        object.__setattr__(obj, "a", a)
        object.__setattr__(obj, "b", b)
        object.__setattr__(obj, "infinite", False)
        return obj

    @classmethod
    def coerce(cls, x: Any) -> Scalar:
        if isinstance(x, Scalar):
            return x
        if isinstance(x, (int, Fraction)):
            return cls._make(Fraction(x), _ZERO)
        if isinstance(x, str):
            return parse_scalar(x)
        raise TypeError(f"cannot convert {x!r} to Scalar")

    # -- predicates -------------------------------------------------------

    def is_rational(self) -> bool:
        return not self.infinite and self.b == 0

    def is_finite(self) -> bool:
        return not self.infinite

    def sign(self) -> int:
        if self.infinite:
            return 1
        sa, sb = _sign(self.a), _sign(self.b)
        if sb == 0:
            return sa
        if sa == 0 or sa == sb:
            return sb
        # opposite signs: compare a^2 with 5 b^2 (never equal, sqrt 5 is irrational)
        return sa if self.a * self.a > 5 * self.b * self.b else sb

    def rational(self) -> Fraction:
        if not self.is_rational():
            raise ValueError(f"{self} is not rational")
        return self.a

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other: Any) -> Scalar:
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if self.infinite or o.infinite:
            return INF
        return Scalar._make(self.a + o.a, self.b + o.b)

    __radd__ = __add__

    def __neg__(self) -> Scalar:
        if self.infinite:
            raise ArithmeticError("negative infinity is not representable")
        return Scalar._make(-self.a, -self.b)

    def __sub__(self, other: Any) -> Scalar:
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if o.infinite:
            raise ArithmeticError(f"cannot subtract infinity from {self}")
        if self.infinite:
            return INF
        return Scalar._make(self.a - o.a, self.b - o.b)

    def __rsub__(self, other: Any) -> Scalar:
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return o - self

    def __mul__(self, other: Any) -> Scalar:
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if self.infinite or o.infinite:
            finite = o if self.infinite else self
            s = finite.sign()
            if s <= 0:
                raise ArithmeticError(f"undefined product of infinity and {finite}")
            return INF
        if self.b == 0 and o.b == 0:
            return Scalar._make(self.a * o.a, _ZERO)
        return Scalar._make(self.a * o.a + 5 * self.b * o.b, self.a * o.b + self.b * o.a)

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> Scalar:
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if o.infinite:
            raise ArithmeticError("division by infinity")
        s = o.sign()
        if s == 0:
            raise ZeroDivisionError("division by zero scalar")
        if self.infinite:
            if s < 0:
                raise ArithmeticError("negative infinity is not representable")
            return INF
        if o.b == 0:
            return Scalar._make(self.a / o.a, self.b / o.a)
        norm = o.a * o.a - 5 * o.b * o.b
        # (a + b r)(c - d r) / (c^2 - 5 d^2)
        return Scalar._make(
            (self.a * o.a - 5 * self.b * o.b) / norm,
            (self.b * o.a - self.a * o.b) / norm,
        )

    def __rtruediv__(self, other: Any) -> Scalar:
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return o / self

    def __pow__(self, k: int) -> Scalar:
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = ONE
        for _ in range(k):
            result = result * self
        return result

    # -- ordering ---------------------------------------------------------

    def _cmp(self, other: Scalar) -> int:
        if self.infinite or other.infinite:
            return int(self.infinite) - int(other.infinite)
        if self.b == 0 and other.b == 0:
            return _sign(self.a - other.a)
        return Scalar._make(self.a - other.a, self.b - other.b).sign()

    def __eq__(self, other: object) -> bool:
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self.infinite == o.infinite and self.a == o.a and self.b == o.b

    def __lt__(self, other: Any) -> bool:
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self._cmp(o) < 0

    def __le__(self, other: Any) -> bool:
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self._cmp(o) <= 0

    def __gt__(self, other: Any) -> bool:
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self._cmp(o) > 0

    def __ge__(self, other: Any) -> bool:
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self._cmp(o) >= 0

    def __hash__(self) -> int:
        if self.infinite:
            return hash(float("inf"))
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b))

    def __bool__(self) -> bool:
        return self.infinite or self.a != 0 or self.b != 0

    def __float__(self) -> float:
        if self.infinite:
            return float("inf")
        return float(self.a) + float(self.b) * 5**0.5

    def __repr__(self) -> str:
        return f"Scalar({self})"

    def __str__(self) -> str:
        if self.infinite:
            return "inf"
        if self.b == 0:
            return str(self.a)
        if self.a == 0:
            return f"{self.b}*sqrt5"
        op = "+" if self.b > 0 else "-"
        return f"{self.a}{op}{abs(self.b)}*sqrt5"

    def to_json(self) -> Any:
        if self.infinite:
            return "inf"
        if self.b == 0:
            if self.a.denominator == 1:
                return self.a.numerator
            return str(self.a)
        return {"r": str(self.a), "s": str(self.b)}


def _coerce(x: Any) -> Any:
    if isinstance(x, Scalar):
        return x
    if isinstance(x, (int, Fraction)) and not isinstance(x, bool):
        return Scalar._make(Fraction(x), _ZERO)
    return NotImplemented


_ZERO = Fraction(0)
ZERO = Scalar(0)
ONE = Scalar(1)
INF = Scalar(infinite=True)
SQRT5 = Scalar(0, 1)
PHI = Scalar(Fraction(1, 2), Fraction(1, 2))


def S(x: Any, b: Any = 0) -> Scalar:
    """Shorthand constructor: ``S(3)``, ``S("1/100")``, ``S(1, 1) == 1 + sqrt 5``."""
    if b == 0 and isinstance(x, Scalar):
        return x
    if isinstance(x, str) and b == 0:
        return parse_scalar(x)
    return Scalar(x, b)


def parse_scalar(obj: Any) -> Scalar:
    """Decode the JSON scalar encoding: int, ``"p/q"``, ``{"r":..,"s":..}`` or ``"inf"``."""
    if isinstance(obj, Scalar):
        return obj
    if isinstance(obj, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(obj, (int, Fraction)):
        return Scalar(obj)
    if isinstance(obj, str):
        text = obj.strip()
        if text.lower() in ("inf", "+inf", "infinity"):
            return INF
        return Scalar(Fraction(text))
    if isinstance(obj, dict):
        if set(obj) - {"r", "s"}:
            raise ValueError(f"unexpected keys in scalar object {obj!r}")
        return Scalar(_frac(obj.get("r", 0)), _frac(obj.get("s", 0)))
    raise TypeError(f"cannot decode scalar from {obj!r}")


def parse_rational(text: Any) -> Fraction:
    value = parse_scalar(text)
    return value.rational()


def smin(values: Iterable[Scalar]) -> Scalar:
    """Minimum with the convention ``min(empty) = +inf``."""
    best = INF
    for v in values:
        if v < best:
            best = v
    return best


def ssum(values: Iterable[Any]) -> Scalar:
    total = ZERO
    for v in values:
        total = total + v
    return total


# ---------------------------------------------------------------------------
# Distributions


class Distribution(Generic[T]):
    """Finite distribution with exact rational probabilities summing to one.

    Repeated outcomes are allowed; :meth:`prob` aggregates them.
    """

    __slots__ = ("items",)

    def __init__(self, items: Iterable[tuple[T, Any]]) -> None:
        pairs = tuple((x, _frac(p)) for x, p in items)
        _validate_probabilities(pairs)
        object.__setattr__(self, "items", pairs)

    def __setattr__(self, name: str, value: Any) -> None:
        raise AttributeError("Distribution is immutable")

    @classmethod
    def uniform(cls, values: Iterable[T]) -> Distribution[T]:
        values = list(values)
        if not values:
            raise ValueError("uniform distribution over an empty set")
        p = Fraction(1, len(values))
        return cls((v, p) for v in values)

    @classmethod
    def point(cls, value: T) -> Distribution[T]:
        return cls([(value, 1)])

    def __iter__(self) -> Iterator[tuple[T, Fraction]]:
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __repr__(self) -> str:
        return f"Distribution({list(self.items)!r})"

    def support(self) -> list[T]:
        seen: list[T] = []
        for x, p in self.items:
            if p > 0 and x not in seen:
                seen.append(x)
        return seen

    def prob(self, value: T) -> Fraction:
        return sum((p for x, p in self.items if x == value), Fraction(0))

    def map(self, f: Callable[[T], Any]) -> Distribution[Any]:
        return Distribution((f(x), p) for x, p in self.items)

    def expectation(self, f: Callable[[T], Any]) -> Scalar:
        return expectation(self, f)


def _validate_probabilities(pairs: Sequence[tuple[Any, Fraction]]) -> None:
    total = Fraction(0)
    for _, p in pairs:
        if p < 0:
            raise ValueError(f"negative probability {p}")
        total += p
    if total != 1:
        raise ValueError(f"probabilities sum to {total}, not 1")


def expectation(dist: Iterable[tuple[T, Any]], f: Callable[[T], Any]) -> Scalar:
    """Exact ``sum p * f(x)``.  Zero-probability outcomes are skipped."""
    pairs = tuple((x, _frac(p)) for x, p in dist)
    _validate_probabilities(pairs)
    total = ZERO
    for x, p in pairs:
        if p == 0:
            continue
        value = Scalar.coerce(f(x))
        if value.infinite:
            raise ValueError(f"expectation of an infinite value at {x!r}")
        total = total + value * p
    return total


# ---------------------------------------------------------------------------
# Type domains and outcomes

Profile = tuple  # one valuation name per player


class TypeDomain:
    """Per-player finite sets of named valuations.

    ``types[i]`` maps a valuation name to a callable ``alternative -> Scalar``.
    Profiles are tuples of names and are enumerated in lexicographic order of
    the per-player insertion order.
    """

    __slots__ = ("_types",)

    def __init__(self, types: Sequence[dict[str, Any]]) -> None:
        frozen = []
        for i, table in enumerate(types):
            if not table:
                raise ValueError(f"player {i} has no valuations")
            names = list(table)
            if len(set(names)) != len(names):
                raise ValueError(f"duplicate valuation names for player {i}")
            frozen.append(tuple(table.items()))
        object.__setattr__(self, "_types", tuple(frozen))

    def __setattr__(self, name: str, value: Any) -> None:
        raise AttributeError("TypeDomain is immutable")

    @property
    def players(self) -> int:
        return len(self._types)

    def names(self, player: int) -> list[str]:
        return [name for name, _ in self._types[player]]

    def valuation(self, player: int, name: str) -> Any:
        for n, v in self._types[player]:
            if n == name:
                return v
        raise KeyError(f"player {player} has no valuation {name!r}")

    def profiles(self) -> list[Profile]:
        return [tuple(p) for p in itertools.product(*(self.names(i) for i in range(self.players)))]

    def deviations(self, profile: Profile, player: int) -> list[Profile]:
        """Profiles reached by a unilateral change of ``player``'s report."""
        out = []
        for name in self.names(player):
            if name != profile[player]:
                out.append(profile[:player] + (name,) + profile[player + 1 :])
        return out


def with_type(profile: Profile, player: int, name: str) -> Profile:
    return profile[:player] + (name,) + profile[player + 1 :]


@dataclass(frozen=True)
class MechanismOutcome:
    """An alternative plus one transfer per player.

    In cost settings the transfer is paid *to* the player; in value settings
    it is charged *from* the player.  Utilities are quasilinear either way.
    """

    alternative: Any
    payments: tuple[Scalar, ...]

    def to_json(self) -> dict:
        return {
            "alternative": _alt_json(self.alternative),
            "payments": [p.to_json() for p in self.payments],
        }


def _alt_json(alt: Any) -> Any:
    if hasattr(alt, "to_json"):
        return alt.to_json()
    if isinstance(alt, tuple):
        return list(alt)
    return alt


# ---------------------------------------------------------------------------
# Valuations over allocations (owner per task or item)


@dataclass(frozen=True)
class Additive:
    """Additive valuation of ``player``: sum of ``weights[t]`` over the tasks/items it owns."""

    player: int
    weights: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(Scalar.coerce(w) for w in self.weights))

    def __call__(self, alloc: Sequence[Any]) -> Scalar:
        total = ZERO
        for t, owner in enumerate(alloc):
            if owner == self.player:
                total = total + self.weights[t]
        return total

    def bundle_value(self, items: Iterable[int]) -> Scalar:
        return ssum(self.weights[t] for t in items)


@dataclass(frozen=True)
class SetFunction:
    """Explicit set-function valuation: ``table[mask]`` is the value of the bundle ``mask``."""

    player: int
    table: tuple

    def __post_init__(self) -> None:
        table = tuple(Scalar.coerce(x) for x in self.table)
        size = len(table)
        if size == 0 or size & (size - 1):
            raise ValueError("set-function table length must be a power of two")
        object.__setattr__(self, "table", table)

    @property
    def items(self) -> int:
        return len(self.table).bit_length() - 1

    def __call__(self, alloc: Sequence[Any]) -> Scalar:
        mask = 0
        for t, owner in enumerate(alloc):
            if owner == self.player:
                mask |= 1 << t
        return self.table[mask]

    def bundle_value(self, items: Iterable[int]) -> Scalar:
        mask = 0
        for t in items:
            mask |= 1 << t
        return self.table[mask]
