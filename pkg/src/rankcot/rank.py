"""Exact rank oracles and the close/far permutation predicates.

Two independent single-head oracles:

* :func:`rank_exact_yesdepth` plays the YES/NO question game on restriction
  states (products of allowed-letter sets) and converts the winning YES-NO tree
  into an a-query tree;
* :func:`rank_exact_minimax` searches directly over every a-query at every node,
  with word subsets as states. It is exponential in ``|A|`` and meant as a
  cross-check on tiny domains.

The multi-head searches reuse the minimax state space.
"""
from __future__ import annotations

import itertools
import math
import sys
from dataclasses import dataclass
from typing import Hashable, Optional, Sequence

import numpy as np

from .core import Domain, FunctionTable, RestrictionState, search_budget
from .errors import InvalidArgumentError, ResourceError
from .trees import (
    AQuery,
    DecisionTree,
    HQuery,
    Leaf,
    Node,
    YesNoTree,
    YNLeaf,
    YNNode,
    yesno_to_aquery_tree,
)

__all__ = [
    "RankCertificate",
    "RestrictionState",
    "rank_exact_yesdepth",
    "rank_exact_minimax",
    "mh_depth1_search",
    "mh_rank_bruteforce",
    "is_close",
    "common_top_element",
]


@dataclass(frozen=True)
class RankCertificate:
    value: int
    witness: DecisionTree
    exhausted: bool = True

    def to_json(self) -> dict:
        return {**self.witness.to_json(), "rank": self.value, "exhausted": self.exhausted}


def _check_witness(f: FunctionTable, tree: DecisionTree) -> DecisionTree:
    if tree.table() != f:
        raise AssertionError("rank witness does not compute the target function")
    return tree


# ---------------------------------------------------------------------------
# YES-depth dynamic programme
# ---------------------------------------------------------------------------

class _YesDepthGame:
    """States are bitmasks over canonical assignment indices (bit ``a`` = still allowed)."""

    def __init__(self, f: FunctionTable):
        d = f.domain
        self.f = f
        self.domain = d
        self.sizes = d.sigma_sizes
        self.offsets = d.offsets
        self.fields = [((1 << s) - 1) << o for s, o in zip(self.sizes, self.offsets)]
        self.strides = [int(np.prod(self.sizes[i + 1:], dtype=np.int64)) for i in range(d.n)]
        self.table = f.outputs.tolist()
        self.out_memo: dict[int, int] = {}
        self.val_memo: dict[int, int] = {}
        self.choice: dict[int, int] = {}

    def outputs(self, s: int) -> int:
        """Bitmask of outputs ``f`` takes on the words of state ``s``."""
        memo = self.out_memo
        hit = memo.get(s)
        if hit is not None:
            return hit
        for i, fld in enumerate(self.fields):
            part = s & fld
            if part & (part - 1):  # more than one letter allowed
                low = part & -part
                res = self.outputs(s & ~fld | low) | self.outputs(s & ~low)
                break
        else:
            index = 0
            for i, fld in enumerate(self.fields):
                letter = ((s & fld) >> self.offsets[i]).bit_length() - 1
                index += letter * self.strides[i]
            res = 1 << self.table[index]
        memo[s] = res
        return res

    def val(self, s: int) -> int:
        memo = self.val_memo
        hit = memo.get(s)
        if hit is not None:
            return hit
        outs = self.outputs(s)
        if not outs & (outs - 1):
            memo[s] = 0
            return 0
        best, best_a = math.inf, -1
        for i, fld in enumerate(self.fields):
            part = s & fld
            if not part & (part - 1):
                continue  # forced position: the question cannot split
            rest = s & ~fld
            bits = part
            while bits:
                low = bits & -bits
                bits ^= low
                yes = 1 + self.val(rest | low)
                if yes >= best:
                    continue
                cand = max(yes, self.val(s & ~low))
                if cand < best:
                    best, best_a = cand, low.bit_length() - 1
                    if best == 1:
                        break
            if best == 1:
                break
        memo[s] = best
        self.choice[s] = best_a
        return best

    def yesno_tree(self, s: int):
        if self.val(s) == 0:
            return YNLeaf(self.outputs(s).bit_length() - 1)
        a = self.choice[s]
        bit = 1 << a
        fld = self.fields[int(self.domain.assignment_positions[a])]
        return YNNode(a, self.yesno_tree(s & ~fld | bit), self.yesno_tree(s & ~bit))


def _state_space_bound(domain: Domain) -> int:
    out = 1
    for s in domain.sigma_sizes:
        out *= (1 << s) - 1
    return out


def rank_exact_yesdepth(f: FunctionTable, budget: int | None = None) -> RankCertificate:
    """Exact rank as the minimal YES-depth of a YES-NO tree for ``f``.

    States are products of allowed-letter sets. Questions about forced
    positions are skipped, ties go to the lowest canonical assignment index.
    The certificate's witness is the converted a-query tree, checked on every word.
    """
    budget = search_budget() if budget is None else budget
    bound = _state_space_bound(f.domain)
    if bound > budget:
        raise ResourceError(f"YES-depth state space has up to {bound} states, budget is {budget}",
                            required=bound, budget=budget)
    game = _YesDepthGame(f)
    full = (1 << f.domain.num_assignments) - 1
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10 * f.domain.num_assignments + 1000))
    try:
        value = game.val(full)
        yn = YesNoTree(f.domain, game.yesno_tree(full))
    finally:
        sys.setrecursionlimit(limit)
    witness = _check_witness(f, yesno_to_aquery_tree(yn))
    return RankCertificate(value, witness, True)


def yesdepth_witness(f: FunctionTable) -> YesNoTree:
    """The optimal YES-NO tree found by the YES-depth game."""
    game = _YesDepthGame(f)
    full = (1 << f.domain.num_assignments) - 1
    game.val(full)
    return YesNoTree(f.domain, game.yesno_tree(full))


# ---------------------------------------------------------------------------
# direct searches over a-queries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _QueryClasses:
    """Distinct answer vectors of all |A|! orders, one representative order each."""

    orders: list[tuple[int, ...]]
    answers: np.ndarray  # (classes, words) canonical assignment index


_CLASS_CACHE: dict[Domain, _QueryClasses] = {}


def _query_classes(domain: Domain, max_A: int) -> _QueryClasses:
    size = domain.num_assignments
    if size > max_A:
        raise ResourceError(f"|A| = {size} exceeds max_A = {max_A}", required=size, budget=max_A)
    if domain in _CLASS_CACHE:
        return _CLASS_CACHE[domain]
    words = domain.words()
    cand = domain.word_assignments(words)  # (N, n)
    seen: dict[bytes, int] = {}
    orders, rows = [], []
    for perm in itertools.permutations(range(size)):
        rank = np.empty(size, dtype=np.int64)
        rank[list(perm)] = np.arange(size)
        ans = cand[np.arange(len(cand)), rank[cand].argmin(axis=1)]
        key = ans.tobytes()
        if key not in seen:
            seen[key] = len(orders)
            orders.append(perm)
            rows.append(ans)
    classes = _QueryClasses(orders, np.array(rows, dtype=np.int64))
    _CLASS_CACHE[domain] = classes
    return classes


def _mask_to_idx(mask: int) -> np.ndarray:
    return np.array([i for i in range(mask.bit_length()) if mask >> i & 1], dtype=np.int64)


def _partition(keys: np.ndarray, idx: np.ndarray) -> dict[tuple, int]:
    parts: dict[tuple, int] = {}
    for row, w in zip(keys.tolist(), idx.tolist()):
        k = tuple(row) if isinstance(row, list) else (row,)
        parts[k] = parts.get(k, 0) | (1 << w)
    return parts


def rank_exact_minimax(f: FunctionTable, max_A: int = 6) -> RankCertificate:
    """Exact rank by searching every order at every node (tiny domains only)."""
    domain = f.domain
    classes = _query_classes(domain, max_A)
    out = f.outputs
    memo: dict[int, tuple[int, int]] = {}

    def constant(mask):
        idx = _mask_to_idx(mask)
        return bool(np.all(out[idx] == out[idx[0]]))

    def val(mask):
        if mask in memo:
            return memo[mask][0]
        if constant(mask):
            memo[mask] = (0, -1)
            return 0
        idx = _mask_to_idx(mask)
        best, best_c = math.inf, -1
        for c in range(len(classes.orders)):
            parts = _partition(classes.answers[c, idx], idx)
            if len(parts) == 1:
                continue
            worst = 0
            for part in parts.values():
                worst = max(worst, val(part))
                if 1 + worst >= best:
                    break
            if 1 + worst < best:
                best, best_c = 1 + worst, c
                if best == 1:
                    break
        memo[mask] = (best, best_c)
        return best

    full = (1 << domain.num_words) - 1
    value = val(full)

    def build(mask):
        v, c = memo[mask]
        if v == 0:
            return Leaf(int(out[_mask_to_idx(mask)[0]]))
        idx = _mask_to_idx(mask)
        parts = _partition(classes.answers[c, idx], idx)
        query = HQuery.single(AQuery(domain, classes.orders[c]))
        return Node(query, {k: build(m) for k, m in sorted(parts.items())})

    witness = _check_witness(f, DecisionTree(domain, build(full), 1))
    return RankCertificate(value, witness, True)


def _determines(same: np.ndarray, differ: np.ndarray) -> np.ndarray:
    """``same``: (..., N, N) equal-answer relation; True where no conflicting pair."""
    return ~np.any(same & differ, axis=(-2, -1))


def mh_depth1_search(
    f: FunctionTable, H: int, max_A: int = 6, budget: int | None = None
) -> Optional[RankCertificate]:
    """Depth-1 tree over ``H``-degree a-queries, or ``None`` if none exists.

    Constant functions get a depth-0 certificate.
    """
    if H < 1:
        raise InvalidArgumentError("H must be >= 1")
    domain = f.domain
    if f.is_constant():
        return RankCertificate(0, DecisionTree(domain, Leaf(int(f.outputs[0])), H), True)
    classes = _query_classes(domain, max_A)
    budget = search_budget() if budget is None else budget
    C = len(classes.orders)
    if C ** H > budget:
        raise ResourceError(f"{C}^{H} query tuples exceed the budget {budget}", required=C ** H, budget=budget)
    ans = classes.answers
    same = ans[:, :, None] == ans[:, None, :]  # (C, N, N)
    differ = f.outputs[:, None] != f.outputs[None, :]
    for prefix in itertools.product(range(C), repeat=H - 1):
        base = np.ones_like(differ)
        for c in prefix:
            base &= same[c]
        ok = _determines(same & base, differ)
        if ok.any():
            chosen = list(prefix) + [int(np.argmax(ok))]
            return RankCertificate(1, _depth1_tree(f, chosen, classes), True)
    return None


def _depth1_tree(f: FunctionTable, chosen: Sequence[int], classes: _QueryClasses) -> DecisionTree:
    domain = f.domain
    query = HQuery(tuple(AQuery(domain, classes.orders[c]) for c in chosen))
    keys = classes.answers[list(chosen)].T  # (N, H)
    children = {}
    for key, o in zip(map(tuple, keys.tolist()), f.outputs.tolist()):
        children[key] = Leaf(o)
    return _check_witness(f, DecisionTree(domain, Node(query, children), len(chosen)))


def mh_rank_bruteforce(
    f: FunctionTable, H: int, max_depth: int = 2, max_A: int = 5, budget: int | None = None
) -> Optional[int]:
    """Exact ``H``-head rank if it is at most ``max_depth`` and the search fits the budget.

    Returns ``None`` (unknown) when the budget runs out or the rank exceeds
    ``max_depth``.
    """
    if H < 1:
        raise InvalidArgumentError("H must be >= 1")
    domain = f.domain
    if f.is_constant():
        return 0
    if domain.num_assignments > max_A:
        return None
    budget = search_budget() if budget is None else budget
    classes = _query_classes(domain, max_A)
    C = len(classes.orders)
    tuples = list(itertools.combinations_with_replacement(range(C), H))
    ans = classes.answers
    out = f.outputs
    work = 0
    memo: dict[tuple[int, int], bool] = {}

    class _OutOfBudget(Exception):
        pass

    same = ans[:, :, None] == ans[:, None, :]
    tuple_same = np.ones((len(tuples),) + same.shape[1:], dtype=bool)
    for j in range(H):
        tuple_same &= same[[t[j] for t in tuples]]

    def solvable(mask, depth):
        nonlocal work
        key = (mask, depth)
        if key in memo:
            return memo[key]
        idx = _mask_to_idx(mask)
        sub = out[idx]
        if np.all(sub == sub[0]):
            memo[key] = True
            return True
        if depth == 0:
            memo[key] = False
            return False
        if depth == 1:
            work += len(tuples)
            if work > budget:
                raise _OutOfBudget
            differ = sub[:, None] != sub[None, :]
            rel = tuple_same[:, idx][:, :, idx]
            res = bool(_determines(rel, differ).any())
            memo[key] = res
            return res
        res = False
        for t in tuples:
            work += 1
            if work > budget:
                raise _OutOfBudget
            keys = np.stack([ans[c, idx] for c in t], axis=1)
            parts = _partition(keys, idx)
            if len(parts) == 1:
                continue
            if all(solvable(p, depth - 1) for p in parts.values()):
                res = True
                break
        memo[key] = res
        return res

    full = (1 << domain.num_words) - 1
    try:
        for depth in range(1, max_depth + 1):
            if solvable(full, depth):
                return depth
    except _OutOfBudget:
        return None
    return None


# ---------------------------------------------------------------------------
# close / far permutations
# ---------------------------------------------------------------------------

def _positions(perm: Sequence[Hashable]) -> dict:
    pos = {x: i for i, x in enumerate(perm, start=1)}
    if len(pos) != len(perm):
        raise InvalidArgumentError("permutation has repeated elements")
    return pos


def is_close(tau: Sequence[Hashable], gamma: Sequence[Hashable]) -> bool:
    """Whether every ``tau[j]`` sits at ``gamma``-position at most ``j + sqrt(|B|)``.

    The square root is handled exactly: ``p > j`` is allowed iff ``(p - j)**2 <= |B|``.
    """
    gpos = _positions(gamma)
    if set(gpos) != set(_positions(tau)):
        raise InvalidArgumentError("tau and gamma must permute the same set")
    m = len(gamma)
    for j, x in enumerate(tau, start=1):
        p = gpos[x]
        if p > j and (p - j) ** 2 > m:
            return False
    return True


def _within_window(r: int, m: int) -> bool:
    """``r <= m/2 + sqrt(m)`` in exact integer arithmetic."""
    return 2 * r <= m or (2 * r - m) ** 2 <= 4 * m


def common_top_element(gamma: Sequence[Hashable], taus: Sequence[Sequence[Hashable]]):
    """An element in the first half of every ``tau`` and near the top of ``gamma``.

    Returns the qualifying element with the smallest ``gamma``-position (at
    most ``m/2 + sqrt(m)``), or ``None``. Every ``tau`` must be close to ``gamma``.
    """
    m = len(gamma)
    for tau in taus:
        if not is_close(tau, gamma):
            raise InvalidArgumentError("a permutation is far from gamma")
    tpos = [_positions(t) for t in taus]
    for r, x in enumerate(gamma, start=1):
        if not _within_window(r, m):
            break
        if all(2 * p[x] <= m for p in tpos):
            return x
    return None
