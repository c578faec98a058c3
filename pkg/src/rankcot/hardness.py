"""From monotone NAE-3-SAT to 2-order separability to 2-head rank-1 samples.

Orders are written maximum-first, the same way a-query orders are: the
"maximum" of a set under an order is its first listed element. For samples
this makes the pair of maxima of a word exactly the answer of the 2-degree
a-query built from the two orders.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from importlib import resources
from typing import Hashable, Optional, Sequence

import numpy as np

from .core import Domain
from .errors import InvalidArgumentError, ResourceError
from .learning import Sample
from .trees import AQuery, DecisionTree, HQuery, Leaf, Node, realizable_answers
from .core import RestrictionState


# ---------------------------------------------------------------------------
# formulas and set families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NAEFormula:
    """Monotone NAE-3-SAT: every clause needs a true and a false variable (1-based)."""

    num_vars: int
    clauses: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        clauses = tuple(tuple(int(x) for x in c) for c in self.clauses)
        for c in clauses:
            if len(c) != 3 or len(set(c)) != 3:
                raise InvalidArgumentError(f"clause {c} must name three distinct variables")
            if any(not 1 <= x <= self.num_vars for x in c):
                raise InvalidArgumentError(f"clause {c} names a variable outside 1..{self.num_vars}")
        object.__setattr__(self, "clauses", clauses)

    def satisfied_by(self, assignment: Sequence[int]) -> bool:
        if len(assignment) != self.num_vars:
            raise InvalidArgumentError("assignment length differs from the variable count")
        return all(len({int(assignment[x - 1]) for x in c}) == 2 for c in self.clauses)

    def satisfying_assignments(self) -> list[tuple[int, ...]]:
        return [a for a in itertools.product((0, 1), repeat=self.num_vars) if self.satisfied_by(a)]

    @classmethod
    def parse(cls, text: str) -> "NAEFormula":
        """``c`` comment lines, a ``p nae3 <vars> <clauses>`` header, one clause per line (trailing 0 optional)."""
        header, clauses = None, []
        for line in text.splitlines():
            parts = line.split()
            if not parts or parts[0] == "c":
                continue
            if parts[0] == "p":
                if len(parts) != 4 or parts[1] != "nae3":
                    raise InvalidArgumentError(f"bad header line: {line!r}")
                header = (int(parts[2]), int(parts[3]))
                continue
            nums = [int(x) for x in parts]
            if nums and nums[-1] == 0:
                nums = nums[:-1]
            if any(x <= 0 for x in nums):
                raise InvalidArgumentError("monotone formulas have positive literals only")
            clauses.append(tuple(nums))
        if header is None:
            raise InvalidArgumentError("missing 'p nae3 n m' header")
        if len(clauses) != header[1]:
            raise InvalidArgumentError(f"header announces {header[1]} clauses, found {len(clauses)}")
        return cls(header[0], tuple(clauses))

    def to_text(self) -> str:
        lines = [f"p nae3 {self.num_vars} {len(self.clauses)}"]
        lines += [" ".join(str(x) for x in c) for c in self.clauses]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SetFamilyInstance:
    universe: tuple[str, ...]
    F: tuple[frozenset, ...]
    G: tuple[frozenset, ...]

    def __post_init__(self):
        universe = tuple(self.universe)
        if len(set(universe)) != len(universe):
            raise InvalidArgumentError("universe has repeated elements")
        known = set(universe)
        fams = []
        for fam in (self.F, self.G):
            sets = tuple(frozenset(s) for s in fam)
            for s in sets:
                if not s:
                    raise InvalidArgumentError("families hold non-empty sets only")
                if not s <= known:
                    raise InvalidArgumentError(f"set {sorted(s)} has elements outside the universe")
            fams.append(sets)
        object.__setattr__(self, "universe", universe)
        object.__setattr__(self, "F", fams[0])
        object.__setattr__(self, "G", fams[1])

    def to_json(self) -> dict:
        order = {x: i for i, x in enumerate(self.universe)}
        fam = lambda sets: [sorted(s, key=order.get) for s in sets]  # noqa: E731
        return {"universe": list(self.universe), "F": fam(self.F), "G": fam(self.G)}

    @classmethod
    def from_json(cls, data: dict | str) -> "SetFamilyInstance":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(tuple(data["universe"]), tuple(frozenset(s) for s in data["F"]),
                   tuple(frozenset(s) for s in data["G"]))


@dataclass(frozen=True)
class OrderPair:
    """Two linear orders, each listed maximum-first."""

    first: tuple
    second: tuple

    def __post_init__(self):
        first, second = tuple(self.first), tuple(self.second)
        if len(set(first)) != len(first) or set(first) != set(second):
            raise InvalidArgumentError("an order pair needs two permutations of one set")
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "second", second)

    def to_json(self) -> dict:
        return {"first": list(self.first), "second": list(self.second)}


def worked_instance() -> SetFamilyInstance:
    """The bundled three-element instance that no pair of orders separates."""
    text = resources.files("rankcot").joinpath("data/worked_instance.json").read_text()
    return SetFamilyInstance.from_json(text)


def _set_max(s, order) -> Hashable:
    for x in order:
        if x in s:
            return x
    raise InvalidArgumentError("set has no element in the order")


def maxima_pair(S, orders: OrderPair) -> tuple:
    if not S:
        raise InvalidArgumentError("maxima of an empty set")
    return _set_max(S, orders.first), _set_max(S, orders.second)


def separates(orders: OrderPair, inst: SetFamilyInstance) -> bool:
    """No F-set shares its maxima pair with a G-set."""
    f_pairs = {maxima_pair(s, orders) for s in inst.F}
    return not any(maxima_pair(t, orders) in f_pairs for t in inst.G)


def two_order_separable_bruteforce(inst: SetFamilyInstance, max_U: int = 6) -> Optional[OrderPair]:
    """Lexicographically first separating pair (permutations of the universe order), or ``None``."""
    U = len(inst.universe)
    if U > max_U:
        raise ResourceError(f"|U| = {U} exceeds max_U = {max_U}", required=U, budget=max_U)
    if not inst.F or not inst.G:
        return OrderPair(inst.universe, inst.universe)
    index = {x: i for i, x in enumerate(inst.universe)}
    f_sets = [np.array(sorted(index[x] for x in s)) for s in inst.F]
    g_sets = [np.array(sorted(index[x] for x in s)) for s in inst.G]
    perms = np.array(list(itertools.permutations(range(U))), dtype=np.int64)
    rank = np.argsort(perms, axis=1)  # rank[p, e] = position of e in perm p

    def maxima(sets):
        return np.stack([s[np.argmin(rank[:, s], axis=1)] for s in sets], axis=1)  # (P, |sets|)

    mf, mg = maxima(f_sets), maxima(g_sets)
    eq = (mf[:, :, None] == mg[:, None, :]).reshape(len(perms), -1)
    packed = np.packbits(eq, axis=1)
    for i in range(len(perms)):
        clash = np.any(packed & packed[i], axis=1)
        if not clash.all():
            j = int(np.argmin(clash))
            pick = lambda p: tuple(inst.universe[e] for e in perms[p])  # noqa: E731
            return OrderPair(pick(i), pick(j))
    return None


# ---------------------------------------------------------------------------
# NAE-3-SAT -> 2-order separability
# ---------------------------------------------------------------------------

ZERO = "0"


def _var(i: int) -> str:
    return f"x{i}"


def reduce_nae_to_2order(phi: NAEFormula) -> SetFamilyInstance:
    """Per variable and per clause, three F-sets and four G-sets over fresh ``u, v, w``."""
    universe = [ZERO] + [_var(i) for i in range(1, phi.num_vars + 1)]
    F, G = [], []
    for i in range(1, phi.num_vars + 1):
        x = _var(i)
        u, v, w = (f"{x}.{s}" for s in "uvw")
        universe += [u, v, w]
        F += [{u, v, w, x, ZERO}, {u, x, ZERO}, {v, x, ZERO}]
        G += [{u, w, x, ZERO}, {v, w, x, ZERO}, {u, ZERO}, {v, x}]
    for j, clause in enumerate(phi.clauses, start=1):
        xs = {_var(i) for i in clause}
        u, v, w = (f"c{j}.{s}" for s in "uvw")
        universe += [u, v, w]
        F += [{u, v, w, ZERO} | xs, {u, ZERO} | xs, {v, ZERO} | xs]
        G += [{u, w, ZERO} | xs, {v, w, ZERO} | xs, {u, ZERO}, {v, ZERO}]
    return SetFamilyInstance(tuple(universe), tuple(map(frozenset, F)), tuple(map(frozenset, G)))


def orders_from_assignment(phi: NAEFormula, assignment: Sequence[int]) -> OrderPair:
    """The separating pair built from an NAE-satisfying assignment.

    In the first order a variable set to 1 sits above ``0`` and a variable set
    to 0 below it; the second order is the reverse. Fresh elements go above
    or below the variables-and-zero core, following each block's template.
    """
    assignment = [int(x) for x in assignment]
    if any(x not in (0, 1) for x in assignment) or not phi.satisfied_by(assignment):
        raise InvalidArgumentError("assignment does not NAE-satisfy the formula")
    top1, top2, bottom1, bottom2 = [], [], [], []
    for i, value in enumerate(assignment, start=1):
        u, v, w = (f"{_var(i)}.{s}" for s in "uvw")
        # value 0: (u, w, 0, x, v) / (v, w, x, 0, u); value 1 swaps the two
        hi1, lo1 = (u, v) if value == 0 else (v, u)
        top1 += [hi1, w]
        bottom1.append(lo1)
        top2 += [lo1, w]
        bottom2.append(hi1)
    for j in range(1, len(phi.clauses) + 1):
        u, v, w = (f"c{j}.{s}" for s in "uvw")
        top1 += [u, w]
        bottom1.append(v)
        top2 += [v, w]
        bottom2.append(u)
    ones = [_var(i) for i, x in enumerate(assignment, start=1) if x == 1]
    zeros = [_var(i) for i, x in enumerate(assignment, start=1) if x == 0]
    core1 = ones + [ZERO] + zeros
    core2 = zeros + [ZERO] + ones
    return OrderPair(tuple(top1 + core1 + bottom1), tuple(top2 + core2 + bottom2))


# ---------------------------------------------------------------------------
# 2-order separability -> 2-head rank-1 sample
# ---------------------------------------------------------------------------

AUX = ("u", "v", "w")


def sample_domain(U_size: int) -> Domain:
    return Domain.binary(3 * U_size + 3)


def gadget_rows(U_size: int) -> tuple[list[tuple[int, ...]], list[tuple[int, ...]]]:
    """Positive and negative gadget words; coordinates are ``u, v, w`` then the working ones."""
    work = 3 * U_size
    unit = lambda j: tuple(1 if i == j else 0 for i in range(work))  # noqa: E731
    zeros, ones = (0,) * work, (1,) * work
    pos = [(1, 0, 0) + unit(j) for j in range(work)] + [(0, 1, 0) + zeros, (1, 0, 1) + ones, (0, 1, 1) + ones]
    neg = [(0, 1, 0) + unit(j) for j in range(work)] + [(1, 0, 0) + zeros, (1, 1, 1) + ones, (0, 0, 1) + ones]
    return pos, neg


def gadget_sample(U_size: int) -> Sample:
    pos, neg = gadget_rows(U_size)
    return Sample(sample_domain(U_size), tuple((w, 1) for w in pos) + tuple((w, 0) for w in neg))


def reduce_2order_to_sample(inst: SetFamilyInstance) -> Sample:
    """Characteristic vectors in three copies of the universe, plus the gadget."""
    U = len(inst.universe)
    index = {x: i for i, x in enumerate(inst.universe)}
    pairs = []
    for label, fam in ((1, inst.F), (0, inst.G)):
        for group in range(3):
            for s in fam:
                word = [0] * (3 * U + 3)
                for x in s:
                    word[3 + group * U + index[x]] = 1
                pairs.append((tuple(word), label))
    pos, neg = gadget_rows(U)
    pairs += [(w, 1) for w in pos] + [(w, 0) for w in neg]
    return Sample(sample_domain(U), tuple(pairs))


def gadget_orders(U_size: int, working_orders: Optional[tuple[Sequence[int], Sequence[int]]] = None) -> OrderPair:
    """Assignment orders (canonical indices, maximum-first) that separate the gadget.

    First order: ``(u,1), (w,1)``, the working 1-assignments, ``(v,1)``, then every
    0-assignment. The second swaps the roles of ``u`` and ``v``. ``working_orders``
    gives the rank of universe elements (maximum-first) inside each working group.
    """
    domain = sample_domain(U_size)
    one = lambda pos: domain.assignment_index(pos, 1)  # noqa: E731
    zeros = [domain.assignment_index(p, 0) for p in range(1, domain.n + 1)]
    if working_orders is None:
        working_orders = (range(U_size), range(U_size))
    result = []
    for h, (top, bottom) in enumerate(((1, 2), (2, 1))):
        work = [one(4 + g * U_size + e) for g in range(3) for e in working_orders[h]]
        result.append([one(top), one(3)] + work + [one(bottom)] + zeros)
    return OrderPair(tuple(result[0]), tuple(result[1]))


def sample_orders_from_pair(inst: SetFamilyInstance, pair: OrderPair) -> OrderPair:
    """Lift a separating pair on the universe to assignment orders for the reduced sample."""
    index = {x: i for i, x in enumerate(inst.universe)}
    return gadget_orders(len(inst.universe), ([index[x] for x in pair.first], [index[x] for x in pair.second]))


def _sample_maxima(orders: OrderPair, S: Sample) -> list[tuple[int, int]]:
    queries = [AQuery(S.domain, tuple(orders.first)), AQuery(S.domain, tuple(orders.second))]
    if not S.pairs:
        return []
    words = np.array([w for w, _ in S.pairs], dtype=np.int64)
    return list(zip(*(q.answers(words).tolist() for q in queries)))


def sample_separates(orders: OrderPair, S: Sample) -> bool:
    """No positive and negative word share their maxima pair."""
    maxima = _sample_maxima(orders, S)
    pos = {m for m, (_, y) in zip(maxima, S.pairs) if y == 1}
    return not any(m in pos for m, (_, y) in zip(maxima, S.pairs) if y == 0)


def tree_from_orders(orders: OrderPair, S: Sample) -> DecisionTree:
    """Depth-1 two-head tree over ``orders``; leaves follow the sample, unseen answers give 0."""
    domain = S.domain
    labels = {m: y for m, (_, y) in zip(_sample_maxima(orders, S), S.pairs)}
    parts = (tuple(orders.first), tuple(orders.second))
    query = HQuery(tuple(AQuery(domain, p) for p in parts))
    children = {key: Leaf(labels.get(key, 0))
                for key, _ in realizable_answers(parts, domain, RestrictionState.full(domain))}
    return DecisionTree(domain, Node(query, children), 2)
