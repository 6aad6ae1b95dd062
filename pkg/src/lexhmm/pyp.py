"""Chinese restaurant franchise bookkeeping for hierarchical Pitman-Yor processes.

A ``Restaurant`` stores, for every dish, a histogram of table sizes
(size -> number of tables).  Its base is either another restaurant, in which
case opening a table sends one customer to the base, or a terminal
distribution object with a ``prob(dish)`` method.

All count changes are expressed as table moves ``(restaurant, dish, from, to)``
where size 0 stands for "no table".  A ``SeatingDelta`` is a journal of such
moves and can be replayed or rolled back exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable


class InconsistentDelta(AssertionError):
    pass


@dataclass
class PYPParams:
    """Discount ``a`` in [0, 1) and strength ``b`` > -a, shared by a level of restaurants."""

    discount: float = 0.5
    strength: float = 1.0

    def __post_init__(self):
        self.validate(self.discount, self.strength)

    @staticmethod
    def validate(a, b):
        if not (0.0 <= a < 1.0) or not (b > -a):
            raise ValueError(f"invalid PYP parameters a={a}, b={b}")


class UniformBase:
    def __init__(self, size: int):
        self.size = size
        self.p = 1.0 / size

    def prob(self, dish) -> float:
        return self.p


class FunctionBase:
    """Terminal base wrapping an arbitrary probability function."""

    def __init__(self, fn):
        self.fn = fn

    def prob(self, dish) -> float:
        return self.fn(dish)


class SeatingDelta:
    """Ordered journal of table moves."""

    __slots__ = ("moves",)

    def __init__(self, moves=None):
        self.moves: list[tuple["Restaurant", Hashable, int, int]] = list(moves or [])

    def record(self, r, dish, frm, to):
        self.moves.append((r, dish, frm, to))

    def extend(self, other: "SeatingDelta"):
        self.moves.extend(other.moves)

    def __len__(self):
        return len(self.moves)

    def __iter__(self):
        return iter(self.moves)

    def rebased(self) -> "SeatingDelta":
        """Same moves addressed to the restaurants underneath any overlays."""
        return SeatingDelta([(r.underlying, d, f, t) for r, d, f, t in self.moves])


def apply_delta(delta: SeatingDelta) -> None:
    for r, dish, frm, to in delta.moves:
        r.move(dish, frm, to)


def revert_delta(delta: SeatingDelta) -> None:
    for r, dish, frm, to in reversed(delta.moves):
        r.move(dish, to, frm)


class Restaurant:
    def __init__(self, params: PYPParams, base, name=None):
        self.params = params
        self.base = base
        self.name = name
        # dish -> [customers, tables, {size: count}]
        self.dishes: dict = {}
        self.n = 0
        self.K = 0

    @property
    def underlying(self) -> "Restaurant":
        return self

    # -- read access ---------------------------------------------------------
    def _entry(self, dish):
        return self.dishes.get(dish)

    def customers(self, dish) -> int:
        e = self._entry(dish)
        return e[0] if e else 0

    def tables(self, dish) -> int:
        e = self._entry(dish)
        return e[1] if e else 0

    def histogram(self, dish) -> dict:
        e = self._entry(dish)
        return dict(e[2]) if e else {}

    def served(self) -> list:
        return [d for d in self._all_dishes() if self.customers(d) > 0]

    def _all_dishes(self):
        return list(self.dishes)

    def base_prob(self, dish) -> float:
        if isinstance(self.base, Restaurant):
            return self.base.predictive_prob(dish)
        return self.base.prob(dish)

    def predictive_prob(self, dish) -> float:
        pb = self.base_prob(dish)
        if self.n == 0:
            return pb
        a, b = self.params.discount, self.params.strength
        e = self._entry(dish)
        cd, kd = (e[0], e[1]) if e else (0, 0)
        return (cd - a * kd + (a * self.K + b) * pb) / (self.n + b)

    # -- mutation --------------------------------------------------------------
    def _mutable_entry(self, dish):
        e = self.dishes.get(dish)
        if e is None:
            e = self.dishes[dish] = [0, 0, {}]
        return e

    def move(self, dish, frm: int, to: int) -> None:
        """Turn one table of size ``frm`` into size ``to`` (0 = absent)."""
        if frm == to or frm < 0 or to < 0:
            raise InconsistentDelta(f"bad move {frm}->{to}")
        e = self._mutable_entry(dish)
        hist = e[2]
        if frm > 0:
            c = hist.get(frm, 0)
            if c == 0:
                raise InconsistentDelta(f"{self.name}: no table of size {frm} for {dish!r}")
            if c == 1:
                del hist[frm]
            else:
                hist[frm] = c - 1
        if to > 0:
            hist[to] = hist.get(to, 0) + 1
        dc = to - frm
        dk = (to > 0) - (frm > 0)
        e[0] += dc
        e[1] += dk
        self.n += dc
        self.K += dk
        if e[0] == 0:
            self._drop(dish)

    def _drop(self, dish):
        del self.dishes[dish]

    def seat(self, dish, rng, delta: SeatingDelta | None = None) -> SeatingDelta:
        """Add one customer eating ``dish``; returns the journal of moves."""
        if delta is None:
            delta = SeatingDelta()
        pb = self.base_prob(dish)
        e = self._entry(dish)
        frm = 0
        if e is not None and e[0] > 0:
            a, b = self.params.discount, self.params.strength
            w_new = (a * self.K + b) * pb
            x = rng.uniform() * (e[0] - a * e[1] + w_new)
            for s in sorted(e[2]):
                w = (s - a) * e[2][s]
                if x < w:
                    frm = s
                    break
                x -= w
        self.move(dish, frm, frm + 1)
        delta.record(self, dish, frm, frm + 1)
        if frm == 0 and isinstance(self.base, Restaurant):
            self.base.seat(dish, rng, delta)
        return delta

    def unseat(self, dish, rng, delta: SeatingDelta | None = None) -> SeatingDelta:
        """Remove one customer of ``dish``, chosen uniformly among its customers."""
        if delta is None:
            delta = SeatingDelta()
        e = self._entry(dish)
        if e is None or e[0] == 0:
            raise InconsistentDelta(f"{self.name}: unseat of unserved dish {dish!r}")
        x = rng.uniform() * e[0]
        sizes = sorted(e[2])
        frm = sizes[-1]
        for s in sizes:
            w = s * e[2][s]
            if x < w:
                frm = s
                break
            x -= w
        self.move(dish, frm, frm - 1)
        delta.record(self, dish, frm, frm - 1)
        if frm == 1 and isinstance(self.base, Restaurant):
            self.base.unseat(dish, rng, delta)
        return delta

    # -- probabilities of the arrangement --------------------------------------
    def table_sizes(self) -> Iterable[tuple[int, int]]:
        for d in self._all_dishes():
            e = self._entry(d)
            if e:
                yield from e[2].items()

    def log_seating_prob(self, a: float | None = None, b: float | None = None) -> float:
        """Log probability of the table partition, excluding dish draws from the base."""
        a = self.params.discount if a is None else a
        b = self.params.strength if b is None else b
        return eppf(a, b, self.n, self.K, self.table_sizes())

    def joint_log_prob(self) -> float:
        """Log probability of this restaurant's arrangement including its base chain.

        Correct when this restaurant is the only child of every ancestor.
        """
        lp = self.log_seating_prob()
        if isinstance(self.base, Restaurant):
            return lp + self.base.joint_log_prob()
        for d in self._all_dishes():
            k = self.tables(d)
            if k:
                lp += k * math.log(self.base.prob(d))
        return lp

    def state(self) -> dict:
        """Canonical snapshot: dish -> sorted (size, count) tuple."""
        out = {}
        for d in self._all_dishes():
            e = self._entry(d)
            if e and e[0]:
                out[d] = tuple(sorted(e[2].items()))
        return out

    def __repr__(self):
        return (f"Restaurant({self.name!r}, a={self.params.discount}, b={self.params.strength}, "
                f"n={self.n}, K={self.K}, dishes={len(self.served())})")


def eppf(a: float, b: float, n: int, K: int, sizes: Iterable[tuple[int, int]]) -> float:
    """Log Pitman-Yor partition probability from a (size, count) table histogram.

    Equals the sum of the sequential seating factors with the base-measure
    terms left out; the first customer's factor is 1.
    """
    if n == 0:
        return 0.0
    lp = 0.0
    if K > 1:
        if a > 0.0:
            lp += (K - 1) * math.log(a) + math.lgamma(b / a + K) - math.lgamma(b / a + 1.0)
        else:
            lp += (K - 1) * math.log(b)
    lp -= math.lgamma(b + n) - math.lgamma(b + 1.0)
    lg1 = math.lgamma(1.0 - a)
    for s, c in sizes:
        if s > 1:
            lp += c * (math.lgamma(s - a) - lg1)
    return lp


class Overlay(Restaurant):
    """Copy-on-write view of a frozen restaurant.

    Reads fall through to the underlying restaurant for dishes not yet touched;
    seats and unseats only change the overlay.  ``SeatingDelta.rebased`` turns
    the overlay's journal into one that commits the same moves underneath.
    """

    def __init__(self, target: Restaurant, base=None):
        super().__init__(target.params, base if base is not None else target.base, target.name)
        self._target = target
        self.n = target.n
        self.K = target.K
        self._removed: set = set()

    @property
    def underlying(self) -> Restaurant:
        return self._target

    def _entry(self, dish):
        e = self.dishes.get(dish)
        if e is not None:
            return e
        if dish in self._removed:
            return None
        return self._target._entry(dish)

    def _mutable_entry(self, dish):
        e = self.dishes.get(dish)
        if e is None:
            src = None if dish in self._removed else self._target._entry(dish)
            e = self.dishes[dish] = [src[0], src[1], dict(src[2])] if src else [0, 0, {}]
            self._removed.discard(dish)
        return e

    def _drop(self, dish):
        del self.dishes[dish]
        self._removed.add(dish)

    def _all_dishes(self):
        seen = [d for d in self._target._all_dishes() if d not in self.dishes and d not in self._removed]
        return seen + list(self.dishes)


def overlay_chain(node: Restaurant) -> Overlay:
    """Overlay ``node`` and every restaurant on its base chain."""
    base = node.base
    if isinstance(base, Restaurant):
        base = overlay_chain(base)
    return Overlay(node, base)


def check_restaurant(r: Restaurant) -> None:
    n = K = 0
    for d in r._all_dishes():
        e = r._entry(d)
        if not e:
            continue
        cd = sum(s * c for s, c in e[2].items())
        kd = sum(e[2].values())
        assert all(s >= 1 and c >= 1 for s, c in e[2].items()), (r.name, d, e)
        assert cd == e[0] and kd == e[1], (r.name, d, e)
        assert (cd > 0) == (kd > 0)
        n += cd
        K += kd
    assert n == r.n and K == r.K, (r.name, n, r.n, K, r.K)


def check_hierarchy(restaurants: Iterable[Restaurant]) -> None:
    """Per-restaurant bookkeeping plus: customers of a parent = tables of its children."""
    restaurants = list(restaurants)
    contributed: dict[int, dict] = {}
    parents = {}
    for r in restaurants:
        check_restaurant(r)
        if isinstance(r.base, Restaurant):
            parents[id(r.base)] = r.base
            acc = contributed.setdefault(id(r.base), {})
            for d in r._all_dishes():
                k = r.tables(d)
                if k:
                    acc[d] = acc.get(d, 0) + k
    for pid, parent in parents.items():
        acc = contributed[pid]
        for d in set(acc) | set(parent._all_dishes()):
            assert parent.customers(d) == acc.get(d, 0), (parent.name, d, parent.customers(d), acc.get(d, 0))


# module-level aliases mirroring the operation names used elsewhere
def predictive_prob(node: Restaurant, dish) -> float:
    return node.predictive_prob(dish)


def seat(node: Restaurant, dish, rng) -> SeatingDelta:
    return node.seat(dish, rng)


def unseat(node: Restaurant, dish, rng) -> SeatingDelta:
    return node.unseat(dish, rng)


def joint_log_prob(node: Restaurant) -> float:
    return node.joint_log_prob()
