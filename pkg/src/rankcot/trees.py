"""Assignment queries and the decision trees built from them.

Three tree flavours live here:

* :class:`DecisionTree` -- internal nodes hold an H-degree a-query and branch on
  the tuple of answers (canonical assignment indices);
* :class:`BooleanDecisionTree` -- classic coordinate-query trees over ``{0,1}^n``;
* :class:`YesNoTree` -- binary trees asking "is assignment ``a`` consistent?".

Children of a :class:`Node` are stored sparsely: an answer tuple that no input
can produce may be absent. :func:`realizable_answers` enumerates exactly the
answers that some word of a :class:`~rankcot.core.RestrictionState` produces.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

from .core import (
    Assignment,
    Domain,
    FunctionTable,
    InvalidArgumentError,
    RestrictionState,
    comp_domain,
    one_domain,
)
from .errors import MalformedTreeError, UnsupportedDomainError


# ---------------------------------------------------------------------------
# queries
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AQuery:
    """A permutation of the assignment set; answers with the first consistent entry."""

    domain: Domain
    order: tuple[int, ...]

    def __post_init__(self):
        order = tuple(int(a) for a in self.order)
        size = self.domain.num_assignments
        if len(order) != size or sorted(order) != list(range(size)):
            raise InvalidArgumentError("an a-query order must list every assignment exactly once")
        object.__setattr__(self, "order", order)
        rank = np.empty(size, dtype=np.int64)
        rank[list(order)] = np.arange(size)
        rank.setflags(write=False)
        object.__setattr__(self, "rank", rank)

    def __eq__(self, other):
        return isinstance(other, AQuery) and self.domain == other.domain and self.order == other.order

    def __hash__(self):
        return hash((self.domain, self.order))

    @classmethod
    def canonical(cls, domain: Domain) -> "AQuery":
        return cls(domain, tuple(range(domain.num_assignments)))

    @classmethod
    def from_prefix(cls, domain: Domain, prefix: Iterable[Union[int, Assignment, tuple]]) -> "AQuery":
        """Order starting with ``prefix``; the rest follows in canonical order."""
        head = []
        for a in prefix:
            idx = a if isinstance(a, (int, np.integer)) else domain.assignment_index(*a)
            if idx not in head:
                head.append(int(idx))
        seen = set(head)
        return cls(domain, tuple(head) + tuple(i for i in range(domain.num_assignments) if i not in seen))

    def answer_index(self, word: Sequence[int]) -> int:
        consistent = [self.domain.offsets[i] + x for i, x in enumerate(word)]
        return min(consistent, key=lambda a: self.rank[a])

    def eval(self, word: Sequence[int]) -> Assignment:
        word = self.domain.check_word(word)
        return self.domain.assignment(self.answer_index(word))

    def answers(self, words: np.ndarray) -> np.ndarray:
        """Vectorised answers (canonical indices) for an ``(N, n)`` word array."""
        idx = self.domain.word_assignments(words)
        pick = self.rank[idx].argmin(axis=1)
        return idx[np.arange(len(idx)), pick]

    def assignments(self) -> list[Assignment]:
        return [self.domain.assignment(a) for a in self.order]


@dataclass(frozen=True)
class HQuery:
    """Product of ``H >= 1`` a-queries over one domain."""

    parts: tuple[AQuery, ...]

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise InvalidArgumentError("an H-degree query needs at least one part")
        if any(p.domain != parts[0].domain for p in parts):
            raise InvalidArgumentError("all parts of an H-degree query must share a domain")
        object.__setattr__(self, "parts", parts)

    @classmethod
    def single(cls, query: AQuery) -> "HQuery":
        return cls((query,))

    @property
    def domain(self) -> Domain:
        return self.parts[0].domain

    @property
    def heads(self) -> int:
        return len(self.parts)

    def answer_key(self, word: Sequence[int]) -> tuple[int, ...]:
        return tuple(p.answer_index(word) for p in self.parts)

    def eval(self, word: Sequence[int]) -> tuple[Assignment, ...]:
        word = self.domain.check_word(word)
        return tuple(self.domain.assignment(a) for a in self.answer_key(word))

    def answers(self, words: np.ndarray) -> np.ndarray:
        return np.stack([p.answers(words) for p in self.parts], axis=1)


def aquery_eval(q: AQuery, w: Sequence[int]) -> Assignment:
    return q.eval(w)


def hquery_eval(q: HQuery, w: Sequence[int]) -> tuple[Assignment, ...]:
    return q.eval(w)


def first_one_order(n: int) -> list[tuple[int, int]]:
    """``(1,1),...,(n,1),(1,0),...,(n,0)``."""
    return [(i, 1) for i in range(1, n + 1)] + [(i, 0) for i in range(1, n + 1)]


def first_zero_order(n: int) -> list[tuple[int, int]]:
    return [(i, 0) for i in range(1, n + 1)] + [(i, 1) for i in range(1, n + 1)]


def realizable_answers(
    orders: Sequence[Sequence[int]], domain: Domain, state: RestrictionState
) -> list[tuple[tuple[int, ...], RestrictionState]]:
    """Answer tuples some word in ``state`` produces, with the sub-state of those words.

    ``orders`` are the permutations of the parts, in head order. Sub-states of
    distinct answer tuples are disjoint and cover ``state``.
    """
    positions = domain.assignment_positions
    letters = domain.assignment_letters
    out = []

    def rec(h, st, prefix):
        if h == len(orders):
            out.append((tuple(prefix), st))
            return
        cur = st
        for a in orders[h]:
            p, x = int(positions[a]), int(letters[a])
            if not cur.allows(p, x):
                continue
            prefix.append(int(a))
            rec(h + 1, cur.assume(p, x), prefix)
            prefix.pop()
            if cur.forced(p, x):
                break
            cur = cur.exclude(p, x)

    rec(0, state, [])
    return out


# ---------------------------------------------------------------------------
# decision trees over H-degree a-queries
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Leaf:
    output: int


@dataclass(frozen=True, eq=False)
class Node:
    query: HQuery
    children: Mapping[tuple[int, ...], "TreeNode"] = field(default_factory=dict)


TreeNode = Union[Leaf, Node]


def _node_depth(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max((_node_depth(c) for c in node.children.values()), default=0)


def _key_str(domain: Domain, key: tuple[int, ...]) -> str:
    return ",".join("{}:{}".format(*domain.assignment(a)) for a in key)


def _parse_key(domain: Domain, text: str) -> tuple[int, ...]:
    key = []
    for part in text.split(","):
        pos, letter = part.split(":")
        key.append(domain.assignment_index(int(pos), int(letter)))
    return tuple(key)


@dataclass(frozen=True, eq=False)
class DecisionTree:
    domain: Domain
    root: TreeNode
    heads: int = 1

    def __post_init__(self):
        if self.heads < 1:
            raise InvalidArgumentError("heads must be >= 1")
        for node in self.iter_nodes():
            if isinstance(node, Leaf):
                if not 0 <= node.output < self.domain.out_size:
                    raise InvalidArgumentError(f"leaf output {node.output} outside the output alphabet")
            else:
                if node.query.heads != self.heads or node.query.domain != self.domain:
                    raise InvalidArgumentError("node query does not match the tree's domain/heads")
                for key in node.children:
                    if len(key) != self.heads:
                        raise InvalidArgumentError(f"child key {key} has the wrong arity")

    def iter_nodes(self) -> Iterator[TreeNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if isinstance(node, Node):
                stack.extend(node.children.values())

    @property
    def depth(self) -> int:
        return _node_depth(self.root)

    def size(self) -> int:
        return sum(1 for _ in self.iter_nodes())

    def eval(self, word: Sequence[int]) -> int:
        word = self.domain.check_word(word)
        node, path = self.root, []
        while isinstance(node, Node):
            key = node.query.answer_key(word)
            if key not in node.children:
                raise MalformedTreeError(
                    f"node at path {path or 'root'} has no child for answer {_key_str(self.domain, key)}"
                )
            path.append(_key_str(self.domain, key))
            node = node.children[key]
        return node.output

    def path(self, word: Sequence[int]) -> list[TreeNode]:
        """Nodes visited on ``word``, root first."""
        word = self.domain.check_word(word)
        node, out = self.root, [self.root]
        while isinstance(node, Node):
            node = node.children[node.query.answer_key(word)]
            out.append(node)
        return out

    def table(self, budget: int | None = None) -> FunctionTable:
        """Evaluate on every word (vectorised); raises on a missing reachable child."""
        words = self.domain.words(budget)
        out = np.full(len(words), -1, dtype=np.int64)
        stack = [(self.root, np.arange(len(words)))]
        while stack:
            node, idx = stack.pop()
            if isinstance(node, Leaf):
                out[idx] = node.output
                continue
            answers = node.query.answers(words[idx])
            keys, inverse = np.unique(answers, axis=0, return_inverse=True)
            inverse = inverse.reshape(-1)
            for j, key in enumerate(keys):
                key = tuple(int(a) for a in key)
                if key not in node.children:
                    raise MalformedTreeError(f"missing child for reachable answer {_key_str(self.domain, key)}")
                stack.append((node.children[key], idx[inverse == j]))
        return FunctionTable(self.domain, out)

    def computes(self, f: FunctionTable) -> bool:
        return self.table() == f

    # -- serialisation -----------------------------------------------------
    def _node_json(self, node):
        if isinstance(node, Leaf):
            return {"leaf": int(node.output)}
        return {
            "query": [list(p.order) for p in node.query.parts],
            "children": {_key_str(self.domain, k): self._node_json(c) for k, c in sorted(node.children.items())},
        }

    def to_json(self) -> dict:
        return {
            "sigma_sizes": list(self.domain.sigma_sizes),
            "out_size": self.domain.out_size,
            "heads": self.heads,
            "root": self._node_json(self.root),
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "DecisionTree":
        if isinstance(data, str):
            data = json.loads(data)
        domain = Domain(tuple(data["sigma_sizes"]), int(data["out_size"]))

        def build(obj):
            if "leaf" in obj:
                return Leaf(int(obj["leaf"]))
            query = HQuery(tuple(AQuery(domain, tuple(p)) for p in obj["query"]))
            children = {_parse_key(domain, k): build(v) for k, v in obj.get("children", {}).items()}
            return Node(query, children)

        return cls(domain, build(data["root"]), int(data.get("heads", 1)))


def tree_eval(tree: DecisionTree, w: Sequence[int]) -> int:
    return tree.eval(w)


def constant_tree(domain: Domain, output: int) -> DecisionTree:
    return DecisionTree(domain, Leaf(output))


def build_tree(domain: Domain, heads: int, expand) -> DecisionTree:
    """Grow a tree top-down along realizable answers only.

    ``expand(state, info)`` returns either ``("leaf", output)`` or
    ``("node", orders, child_info)`` where ``child_info(key, substate)`` gives
    the info passed to the child.
    """

    def rec(state, info):
        spec = expand(state, info)
        if spec[0] == "leaf":
            return Leaf(int(spec[1]))
        _, orders, child_info = spec
        query = HQuery(tuple(AQuery(domain, o) for o in orders))
        children = {}
        for key, sub in realizable_answers([p.order for p in query.parts], domain, state):
            children[key] = rec(sub, child_info(key, sub))
        return Node(query, children)

    return DecisionTree(domain, rec(RestrictionState.full(domain), None), heads)


# ---------------------------------------------------------------------------
# Boolean coordinate trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BLeaf:
    bit: int


@dataclass(frozen=True, eq=False)
class BNode:
    position: int  # 1-based
    zero: "BTreeNode"
    one: "BTreeNode"


BTreeNode = Union[BLeaf, BNode]


@dataclass(frozen=True, eq=False)
class BooleanDecisionTree:
    n: int
    root: BTreeNode

    def __post_init__(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, BNode):
                if not 1 <= node.position <= self.n:
                    raise InvalidArgumentError(f"position {node.position} outside 1..{self.n}")
                stack += [node.zero, node.one]
            elif node.bit not in (0, 1):
                raise InvalidArgumentError("Boolean leaves carry bits")

    @property
    def domain(self) -> Domain:
        return Domain.binary(self.n)

    def eval(self, word: Sequence[int]) -> int:
        node = self.root
        while isinstance(node, BNode):
            node = node.one if word[node.position - 1] else node.zero
        return node.bit

    def table(self) -> FunctionTable:
        return FunctionTable.from_function(self.domain, self.eval)

    @property
    def depth(self) -> int:
        def d(node):
            return 0 if isinstance(node, BLeaf) else 1 + max(d(node.zero), d(node.one))

        return d(self.root)


def _brank(node: BTreeNode, memo: dict) -> int:
    key = id(node)
    if key not in memo:
        if isinstance(node, BLeaf):
            memo[key] = 0
        else:
            r0, r1 = _brank(node.zero, memo), _brank(node.one, memo)
            memo[key] = max(min(r0, r1) + 1, max(r0, r1))
    return memo[key]


def boolean_tree_rank(tree: Union[BooleanDecisionTree, BTreeNode]) -> int:
    """Ehrenfeucht-Haussler rank: leaves 0, inner ``max(min(r0,r1)+1, max(r0,r1))``."""
    root = tree.root if isinstance(tree, BooleanDecisionTree) else tree
    return _brank(root, {})


def normalize_boolean_tree(tree: BooleanDecisionTree) -> BooleanDecisionTree:
    """Drop queries of positions already read on the path (never raises rank)."""

    def rec(node, known):
        if isinstance(node, BLeaf):
            return node
        if node.position in known:
            return rec(node.one if known[node.position] else node.zero, known)
        zero = rec(node.zero, {**known, node.position: 0})
        one = rec(node.one, {**known, node.position: 1})
        return BNode(node.position, zero, one)

    return BooleanDecisionTree(tree.n, rec(tree.root, {}))


def boolean_to_aquery_tree(tree: BooleanDecisionTree) -> DecisionTree:
    """Depth-``rank(T)`` a-query tree computing the same function.

    At the current node we follow the chain of elderly children (the child whose
    sibling has smaller rank; the 0-child on ties) down to a leaf and ask the
    a-query that lists, for every chain step, the assignment leaving the chain.
    The first YES tells where the input leaves the chain; all NOs mean it
    reaches the chain's leaf. Either way rank strictly drops.
    """
    tree = normalize_boolean_tree(tree)
    domain = tree.domain
    memo: dict = {}

    def elderly(node: BNode):
        r0, r1 = _brank(node.zero, memo), _brank(node.one, memo)
        return (1, node.one, node.zero) if r1 > r0 else (0, node.zero, node.one)

    def build(node, state):
        if isinstance(node, BLeaf):
            return Leaf(node.bit)
        prefix, subtrees = [], []
        u = node
        while isinstance(u, BNode):
            b, elder, other = elderly(u)
            prefix.append(domain.assignment_index(u.position, 1 - b))
            subtrees.append(other)
            u = elder
        query = AQuery.from_prefix(domain, prefix)
        children = {}
        for key, sub in realizable_answers([query.order], domain, state):
            a = key[0]
            if a in prefix:
                children[key] = build(subtrees[prefix.index(a)], sub)
            else:
                children[key] = Leaf(u.bit)
        return Node(HQuery.single(query), children)

    return DecisionTree(domain, build(tree.root, RestrictionState.full(domain)), 1)


# ---------------------------------------------------------------------------
# YES-NO trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class YNLeaf:
    output: int


@dataclass(frozen=True, eq=False)
class YNNode:
    assignment: int  # canonical index
    yes: "YNTreeNode"
    no: "YNTreeNode"


YNTreeNode = Union[YNLeaf, YNNode]


@dataclass(frozen=True, eq=False)
class YesNoTree:
    domain: Domain
    root: YNTreeNode

    def eval(self, word: Sequence[int]) -> int:
        word = self.domain.check_word(word)
        node = self.root
        while isinstance(node, YNNode):
            pos, letter = self.domain.assignment(node.assignment)
            node = node.yes if word[pos - 1] == letter else node.no
        return node.output

    def table(self) -> FunctionTable:
        return FunctionTable.from_function(self.domain, self.eval)


def yes_depth(tree: Union[YesNoTree, YNTreeNode]) -> int:
    """Maximal number of YES edges on a root-to-leaf path."""
    root = tree.root if isinstance(tree, YesNoTree) else tree
    memo: dict = {}

    def rec(node):
        if isinstance(node, YNLeaf):
            return 0
        if id(node) not in memo:
            memo[id(node)] = max(1 + rec(node.yes), rec(node.no))
        return memo[id(node)]

    return rec(root)


def aquery_to_yesno(tree: DecisionTree) -> YesNoTree:
    """Ask each a-query as a chain of YES-NO questions; one YES per query.

    Questions whose answer is already implied by the path are skipped (a
    forced YES descends without asking), so a first-one query over three bits
    becomes three questions.
    """
    if tree.heads != 1:
        raise InvalidArgumentError("YES-NO conversion needs a single-head tree")
    domain = tree.domain
    positions, letters = domain.assignment_positions, domain.assignment_letters

    def conv(node, state):
        if isinstance(node, Leaf):
            return YNLeaf(node.output)
        return chain(node, node.query.parts[0].order, 0, state)

    def child(node, a):
        try:
            return node.children[(a,)]
        except KeyError:
            raise MalformedTreeError(f"missing child for reachable answer {domain.assignment(a)}") from None

    def chain(node, order, j, state):
        while j < len(order):
            a = order[j]
            p, x = int(positions[a]), int(letters[a])
            if not state.allows(p, x):
                j += 1
                continue
            if state.forced(p, x):
                return conv(child(node, a), state)
            yes = conv(child(node, a), state.assume(p, x))
            no = chain(node, order, j + 1, state.exclude(p, x))
            return YNNode(a, yes, no)
        raise AssertionError("empty restriction state reached")  # pragma: no cover

    return YesNoTree(domain, conv(tree.root, RestrictionState.full(domain)))


def yesno_to_boolean_tree(tree: YesNoTree) -> BooleanDecisionTree:
    """Relabel ``(i, b)`` as a query of position ``i`` with YES on the ``b`` edge."""
    domain = tree.domain
    if not domain.is_binary:
        raise UnsupportedDomainError("Boolean trees exist only over binary domains")

    def rec(node):
        if isinstance(node, YNLeaf):
            if node.output not in (0, 1):
                raise UnsupportedDomainError("Boolean trees need binary outputs")
            return BLeaf(node.output)
        pos, b = domain.assignment(node.assignment)
        yes, no = rec(node.yes), rec(node.no)
        return BNode(pos, no, yes) if b == 1 else BNode(pos, yes, no)

    return BooleanDecisionTree(domain.n, rec(tree.root))


def yesno_to_aquery_tree(tree: YesNoTree) -> DecisionTree:
    """A-query tree of depth at most ``yes_depth(tree)``, any alphabet.

    The a-query at a node lists the questions of its NO-chain in order; the
    first consistent one is where the input takes its first YES.
    """
    domain = tree.domain
    positions, letters = domain.assignment_positions, domain.assignment_letters

    def build(node, state):
        if isinstance(node, YNLeaf):
            return Leaf(node.output)
        prefix, targets = [], []
        u, st = node, state
        while isinstance(u, YNNode):
            a = u.assignment
            p, x = int(positions[a]), int(letters[a])
            if not st.allows(p, x):
                u = u.no
                continue
            prefix.append(a)
            if st.forced(p, x):
                targets.append(u.yes)
                u = None
                break
            targets.append(u.yes)
            st = st.exclude(p, x)
            u = u.no
        query = AQuery.from_prefix(domain, prefix)
        children = {}
        for key, sub in realizable_answers([query.order], domain, state):
            a = key[0]
            if a in prefix:
                children[key] = build(targets[prefix.index(a)], sub)
            else:
                children[key] = Leaf(u.output)
        return Node(HQuery.single(query), children)

    return DecisionTree(domain, build(tree.root, RestrictionState.full(domain)), 1)


# ---------------------------------------------------------------------------
# family trees and random trees
# ---------------------------------------------------------------------------

def comp_tree(n: int, t: int) -> DecisionTree:
    """Depth-``t`` tree for ``comp^t_n``: guess ``f(1)``, then ``f(f(1))``, ..."""
    domain = comp_domain(n)

    def expand(state, info):
        depth, value = info if info is not None else (0, 1)
        if depth == t:
            return ("leaf", value - 1)
        prefix = [domain.assignment_index(value, s) for s in range(n)]
        order = AQuery.from_prefix(domain, prefix).order

        def child(key, sub):
            return (depth + 1, domain.assignment(key[0]).letter + 1)

        return ("node", [order], child)

    return build_tree(domain, 1, expand)


def one_tree(n: int, k: int) -> DecisionTree:
    """Depth-``k`` tree for ``one^k_n`` asking for the next one after the last found."""
    domain = one_domain(n)

    def expand(state, info):
        found, last = info if info is not None else (0, 0)
        if found == k:
            return ("leaf", last - 1)
        if last == n:
            return ("leaf", n)
        order = [(i, 1) for i in range(last + 1, n + 1)]
        order += [(i, 0) for i in range(1, n + 1)]
        order += [(i, 1) for i in range(1, last + 1)]
        query = AQuery.from_prefix(domain, order)

        def child(key, sub):
            pos, letter = domain.assignment(key[0])
            if letter == 1 and pos > last:
                return (found + 1, pos)
            return (k, n + 1)  # no further one: output n + 1

        return ("node", [query.order], child)

    return build_tree(domain, 1, expand)


def random_tree(
    domain: Domain,
    depth: int,
    heads: int = 1,
    rng: np.random.Generator | None = None,
    leaf_prob: float = 0.2,
) -> DecisionTree:
    """Random tree over realizable answers, with random early leaves."""
    rng = np.random.default_rng() if rng is None else rng
    size = domain.num_assignments

    def expand(state, level):
        level = 0 if level is None else level
        if level >= depth or (level > 0 and rng.random() < leaf_prob):
            return ("leaf", int(rng.integers(domain.out_size)))
        orders = [tuple(int(a) for a in rng.permutation(size)) for _ in range(heads)]
        return ("node", orders, lambda key, sub: level + 1)

    return build_tree(domain, heads, expand)


def random_boolean_tree(n: int, depth: int, rng: np.random.Generator, leaf_prob: float = 0.25) -> BooleanDecisionTree:
    def rec(level):
        if level >= depth or (level > 0 and rng.random() < leaf_prob):
            return BLeaf(int(rng.integers(2)))
        return BNode(int(rng.integers(1, n + 1)), rec(level + 1), rec(level + 1))

    return BooleanDecisionTree(n, rec(0))
