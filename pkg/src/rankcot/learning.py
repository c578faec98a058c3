"""Rank-k consistency and a PAC harness around it.

The solver rests on one fact: if some assignment ``a`` splits off a non-empty
part ``S_a`` of the sample that a rank-``(k-1)`` tree fits, then ``S`` is
rank-``k`` consistent exactly when ``S`` minus ``S_a`` is. The two trees are
spliced by moving ``a`` to the front of the root query.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .core import Assignment, Domain, FunctionTable, RestrictionState
from .errors import InvalidArgumentError, UnsupportedDomainError
from .trees import AQuery, DecisionTree, HQuery, Leaf, Node, realizable_answers


@dataclass(frozen=True)
class Sample:
    domain: Domain
    pairs: tuple[tuple[tuple[int, ...], int], ...]

    def __post_init__(self):
        pairs = tuple((self.domain.check_word(w), int(y)) for w, y in self.pairs)
        for _, y in pairs:
            if not 0 <= y < self.domain.out_size:
                raise InvalidArgumentError(f"label {y} outside the output alphabet")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self):
        return len(self.pairs)

    def contradictions(self) -> list[tuple[int, ...]]:
        """Words that carry two different labels."""
        seen: dict[tuple, int] = {}
        bad = []
        for w, y in self.pairs:
            if seen.setdefault(w, y) != y and w not in bad:
                bad.append(w)
        return bad

    def consistent_with(self, tree: Union[DecisionTree, FunctionTable]) -> bool:
        fn = tree.eval if isinstance(tree, DecisionTree) else tree
        return all(fn(w) == y for w, y in self.pairs)

    @classmethod
    def from_table(cls, f: FunctionTable) -> "Sample":
        words = f.domain.words()
        return cls(f.domain, tuple((tuple(int(x) for x in w), int(y)) for w, y in zip(words, f.outputs)))

    def to_json(self) -> dict:
        return {
            "sigma_sizes": list(self.domain.sigma_sizes),
            "out_size": self.domain.out_size,
            "pairs": [[list(w), y] for w, y in self.pairs],
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "Sample":
        if isinstance(data, str):
            data = json.loads(data)
        domain = Domain(tuple(data["sigma_sizes"]), int(data.get("out_size", 2)))
        return cls(domain, tuple((tuple(w), int(y)) for w, y in data["pairs"]))


def subsample_with(S: Sample, a: Assignment) -> Sample:
    """The pairs whose word holds ``a``."""
    S.domain.assignment_index(*a)
    return Sample(S.domain, tuple((w, y) for w, y in S.pairs if w[a.position - 1] == a.letter))


def subsample_without(S: Sample, a: Assignment) -> Sample:
    S.domain.assignment_index(*a)
    return Sample(S.domain, tuple((w, y) for w, y in S.pairs if w[a.position - 1] != a.letter))


@dataclass(frozen=True)
class ConsistencyResult:
    tree: Optional[DecisionTree]
    reason: str  # "ok", "unsat" or "contradictory"

    @property
    def ok(self) -> bool:
        return self.tree is not None


def _splice(domain: Domain, a: int, sub: object, rest: object):
    """Root query with ``a`` first; ``a`` leads to ``sub``, everything else behaves like ``rest``."""
    full = RestrictionState.full(domain)
    if isinstance(rest, Leaf):
        order = AQuery.from_prefix(domain, [a]).order
        children = {key: (sub if key == (a,) else rest)
                    for key, _ in realizable_answers([order], domain, full)}
        return Node(HQuery.single(AQuery(domain, order)), children)
    old = rest.query.parts[0].order
    order = (a,) + tuple(b for b in old if b != a)
    children = {k: c for k, c in rest.children.items() if k != (a,)}
    children[(a,)] = sub
    return Node(HQuery.single(AQuery(domain, order)), children)


def solve_consistency(S: Sample, k: int) -> ConsistencyResult:
    """A depth-``<= k`` single-head tree agreeing with every pair of ``S``, or Unsat.

    Assignments are tried in canonical order; results are memoised on the
    sub-sample so each rank-``(k-1)`` check is computed once.
    """
    if k < 0:
        raise InvalidArgumentError("k must be >= 0")
    domain = S.domain
    if any(y not in (0, 1) for _, y in S.pairs):
        raise UnsupportedDomainError("the consistency solver handles binary labels only")
    if S.contradictions():
        return ConsistencyResult(None, "contradictory")
    uniq = list(dict(S.pairs).items())
    positive = 0
    for i, (_, y) in enumerate(uniq):
        if y:
            positive |= 1 << i
    masks = [0] * domain.num_assignments
    for i, (w, _) in enumerate(uniq):
        for p, x in enumerate(w):
            masks[domain.offsets[p] + x] |= 1 << i
    memo: dict[tuple[int, int], object] = {}

    def solve(mask: int, depth: int):
        key = (mask, depth)
        if key in memo:
            return memo[key]
        if mask & positive == mask:
            res = Leaf(1 if mask else 0)
        elif mask & positive == 0:
            res = Leaf(0)
        elif depth == 0:
            res = None
        else:
            res = None
            for a, ma in enumerate(masks):
                part = mask & ma
                if not part:
                    continue
                sub = solve(part, depth - 1)
                if sub is None:
                    continue
                rest = solve(mask & ~ma, depth)
                if rest is not None:
                    res = _splice(domain, a, sub, rest)
                break  # the remainder decides, whatever a we picked
        memo[key] = res
        return res

    root = solve((1 << len(uniq)) - 1, k)
    if root is None:
        return ConsistencyResult(None, "unsat")
    tree = DecisionTree(domain, root, 1)
    if tree.depth > k or not S.consistent_with(tree):
        raise AssertionError("consistency solver produced an invalid tree")
    return ConsistencyResult(tree, "ok")


# ---------------------------------------------------------------------------
# PAC harness
# ---------------------------------------------------------------------------

@dataclass
class SampleSource:
    """Seeded i.i.d. examples ``(w, target(w))`` with ``w`` drawn from ``weights`` (uniform if None)."""

    domain: Domain
    target: Union[DecisionTree, FunctionTable]
    seed: int = 0
    weights: Optional[np.ndarray] = None
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)
        self._table = self.target.table() if isinstance(self.target, DecisionTree) else self.target
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (self.domain.num_words,) or np.any(w < 0) or w.sum() <= 0:
                raise InvalidArgumentError("weights must be a non-negative vector over all words")
            self.weights = w / w.sum()

    def draw(self, m: int) -> Sample:
        if self.weights is None:
            words = np.stack([self.rng.integers(0, s, size=m) for s in self.domain.sigma_sizes], axis=1)
            idx = [self.domain.encode(w) for w in words]
        else:
            idx = self.rng.choice(self.domain.num_words, size=m, p=self.weights)
        pairs = tuple((self.domain.decode(int(i)), int(self._table.outputs[i])) for i in idx)
        return Sample(self.domain, pairs)

    def true_error(self, tree: DecisionTree) -> float:
        """Exact error of ``tree`` under the source distribution."""
        wrong = tree.table().outputs != self._table.outputs
        if self.weights is None:
            return float(wrong.mean())
        return float(self.weights[wrong].sum())


def log_hypothesis_count(domain: Domain, k: int) -> float:
    """Proxy for ``ln`` of the number of depth-``k`` trees: ``|A| k ln|A| + |A|^k ln|O|``."""
    A = domain.num_assignments
    return A * k * math.log(A) + A ** k * math.log(domain.out_size)


def pac_sample_size(domain: Domain, k: int, epsilon: float, delta: float) -> int:
    if not (0 < epsilon < 1 and 0 < delta < 1):
        raise InvalidArgumentError("epsilon and delta must lie in (0, 1)")
    return math.ceil((log_hypothesis_count(domain, k) + math.log(1 / delta)) / epsilon)


@dataclass(frozen=True)
class PACResult:
    tree: Optional[DecisionTree]
    sample_size: int
    consistency: ConsistencyResult

    @property
    def ok(self) -> bool:
        return self.tree is not None


def pac_learn(src: SampleSource, k: int, epsilon: float, delta: float) -> PACResult:
    """Draw enough examples for the ``(epsilon, delta)`` guarantee and solve consistency."""
    m = pac_sample_size(src.domain, k, epsilon, delta)
    result = solve_consistency(src.draw(m), k)
    return PACResult(result.tree, m, result)
