"""Trees to decoders and back.

:func:`compile_tree` turns a depth-``r`` tree over ``H``-degree a-queries into a
rational machine whose ``t``-th output is the one-hot code of the node the tree
visits at depth ``t``. :func:`extract_tree` reads any machine back as a depth-``t``
tree: at each node, every head's attention choice is the answer of the
a-query that lists assignments by descending score.

Coordinate layout of a compiled machine, in order:

* positional ``(v, h)`` for every non-leaf node ``v`` and head ``h``;
* output ``v`` for every node;
* assignment ``(a, h)`` for every assignment ``a`` and head ``h``;
* one special coordinate.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .core import Domain, RestrictionState
from .decoder import (
    FLOAT_TIE_TOL,
    AttentionLayer,
    DecoderMachine,
    OutputMap,
    SparseMatrix,
    _dot,
    _matvec,
    layer_output_from_heads,
)
from .errors import AmbiguousOutputError, InvalidArgumentError
from .trees import AQuery, DecisionTree, HQuery, Leaf, Node, realizable_answers


# ---------------------------------------------------------------------------
# padding
# ---------------------------------------------------------------------------

def pad_tree(tree: DecisionTree) -> DecisionTree:
    """Equivalent tree whose leaves all sit at depth ``max(depth, 1)``.

    An early leaf is extended by queries whose answer is already known on its
    path (some position is fixed by every earlier answer), so each padding
    node has one reachable child. A leaf at the root has no such position and
    is padded with the canonical order instead.
    """
    domain, H = tree.domain, tree.heads
    r = max(tree.depth, 1)

    def forced_assignment(state: RestrictionState) -> Optional[int]:
        for p, mask in enumerate(state.allowed):
            if mask and not mask & (mask - 1):
                return domain.offsets[p] + mask.bit_length() - 1
        return None

    def pad(node, state, depth):
        if depth == r:
            return node
        if isinstance(node, Node):
            subs = {}
            if state is not None:
                orders = [p.order for p in node.query.parts]
                subs = dict(realizable_answers(orders, domain, state))
            children = {k: pad(c, subs.get(k), depth + 1) for k, c in node.children.items()}
            return Node(node.query, children)
        a = forced_assignment(state) if state is not None else None
        if a is not None:
            query = HQuery(tuple(AQuery.from_prefix(domain, [a]) for _ in range(H)))
            return Node(query, {(a,) * H: pad(node, state, depth + 1)})
        query = HQuery(tuple(AQuery.canonical(domain) for _ in range(H)))
        if state is None:  # unreachable: any single child will do
            return Node(query, {(0,) * H: pad(node, None, depth + 1)})
        orders = [p.order for p in query.parts]
        return Node(query, {k: pad(node, s, depth + 1) for k, s in realizable_answers(orders, domain, state)})

    return DecisionTree(domain, pad(tree.root, RestrictionState.full(domain), 0), H)


# ---------------------------------------------------------------------------
# layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompiledLayout:
    tree: DecisionTree  # the padded tree actually compiled
    nodes: tuple  # breadth-first node occurrences
    parent: tuple  # parent node id per node (-1 for the root)
    edge: tuple  # answer key leading into each node (None for the root)
    nonleaf: tuple  # ids of non-leaf nodes
    H: int
    num_assignments: int

    @property
    def positional_base(self) -> int:
        return 0

    @property
    def output_base(self) -> int:
        return len(self.nonleaf) * self.H

    @property
    def assignment_base(self) -> int:
        return self.output_base + len(self.nodes)

    @property
    def special(self) -> int:
        return self.assignment_base + self.num_assignments * self.H

    @property
    def d(self) -> int:
        return self.special + 1

    def positional(self, nonleaf_rank: int, h: int) -> int:
        return nonleaf_rank * self.H + h

    def output(self, node_id: int) -> int:
        return self.output_base + node_id

    def assignment(self, a: int, h: int) -> int:
        return self.assignment_base + h * self.num_assignments + a

    def leaf_ids(self) -> list[int]:
        return [i for i, node in enumerate(self.nodes) if isinstance(node, Leaf)]


def compile_layout(tree: DecisionTree, pad: bool = True) -> CompiledLayout:
    """Coordinate layout; ``pad=False`` lays out the tree exactly as given."""
    if pad:
        tree = pad_tree(tree)
    nodes, parent, edge = [tree.root], [-1], [None]
    head = 0
    while head < len(nodes):
        node = nodes[head]
        if isinstance(node, Node):
            for key, child in sorted(node.children.items()):
                nodes.append(child)
                parent.append(head)
                edge.append(key)
        head += 1
    nonleaf = tuple(i for i, node in enumerate(nodes) if isinstance(node, Node))
    return CompiledLayout(tree, tuple(nodes), tuple(parent), tuple(edge), nonleaf, tree.heads,
                          tree.domain.num_assignments)


def compile_tree(tree: DecisionTree) -> DecoderMachine:
    """Rational machine computing ``tree`` in ``max(depth, 1)`` iterations."""
    layout = compile_layout(tree)
    padded = layout.tree
    domain, H, d = padded.domain, padded.heads, layout.d
    A = domain.num_assignments

    encoding = []
    for a in range(A):
        vec = {}
        for rank_idx, v in enumerate(layout.nonleaf):
            rank = layout.nodes[v].query.parts
            for h in range(H):
                vec[layout.positional(rank_idx, h)] = Fraction(1, int(rank[h].rank[a]) + 1)
        vec[layout.assignment(a, 0)] = Fraction(1)
        vec[layout.special] = Fraction(1)
        encoding.append(vec)
    eol = {layout.output(0): Fraction(1)}

    Q = [SparseMatrix((d, d)) for _ in range(H)]
    for rank_idx, v in enumerate(layout.nonleaf):
        for h in range(H):
            Q[h].set(layout.positional(rank_idx, h), layout.output(v), 1)
    K = [SparseMatrix.identity(d) for _ in range(H)]

    W_O = [SparseMatrix((d, d)) for _ in range(H)]
    for h in range(H):
        for a in range(A):
            W_O[h].set(layout.assignment(a, h), layout.assignment(a, 0), 1)
    W_O[0].set(layout.special, layout.special, 1)  # keep the constant 1 for the threshold

    W1 = SparseMatrix((d, d))
    for v in range(1, len(layout.nodes)):
        row = layout.output(v)
        W1.set(row, layout.output(layout.parent[v]), 1)
        for h, a in enumerate(layout.edge[v]):
            W1.set(row, layout.assignment(a, h), W1.get(row, layout.assignment(a, h)) + 1)
        W1.set(row, layout.special, -H)
    W2 = SparseMatrix.identity(d)

    layer = AttentionLayer(d, H, tuple(Q), tuple(K), tuple(W_O), W1, W2, "rational")
    leaves = layout.leaf_ids()
    out_map = OutputMap.argmax([layout.output(v) for v in leaves], [layout.nodes[v].output for v in leaves])
    return DecoderMachine(domain, layer, tuple(encoding), eol, out_map, max(padded.depth, 1))


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------

def _score_order(scores: list, domain: Domain, exact: bool) -> list[int]:
    """Assignments by descending score, then position, then canonical index."""
    positions = domain.assignment_positions
    if exact:
        return sorted(range(len(scores)), key=lambda a: (-scores[a], positions[a], a))
    by_score = sorted(range(len(scores)), key=lambda a: -scores[a])
    group, groups, top = 0, {}, None
    prev = None
    for a in by_score:
        s = scores[a]
        if top is None or s < top - FLOAT_TIE_TOL:
            if prev is not None and prev - s <= FLOAT_TIE_TOL:
                raise AmbiguousOutputError("float scores chain across the tie tolerance; use the rational backend")
            group, top = group + 1, s
        groups[a] = group
        prev = s
    return sorted(range(len(scores)), key=lambda a: (groups[a], positions[a], a))


def extract_tree(machine: DecoderMachine, t: int | None = None) -> DecisionTree:
    """Depth-``t`` tree over ``H``-degree a-queries reproducing ``t`` iterations of ``machine``."""
    t = machine.iterations if t is None else t
    if t < 1:
        raise InvalidArgumentError("t must be >= 1")
    domain, layer = machine.domain, machine.layer
    exact = machine.backend == "rational"
    A = domain.num_assignments

    def build(ys, state):
        if len(ys) - 1 == t:
            return Leaf(machine.output_map.apply(ys[-1], domain.out_size))
        last = ys[-1]
        orders, head_scores, y_choice = [], [], []
        for h in range(layer.H):
            q = _matvec(layer, layer.Q[h], last)
            keys = machine.assignment_keys(h)
            scores = [_dot(layer, keys[a], q) for a in range(A)]
            y_scores = [_dot(layer, _matvec(layer, layer.K[h], y), q) for y in ys]
            best_y = max(y_scores)
            j = next(i for i, s in enumerate(y_scores) if s == best_y) if exact else \
                next(i for i, s in enumerate(y_scores) if s >= best_y - FLOAT_TIE_TOL)
            orders.append(_score_order(scores, domain, exact))
            head_scores.append(scores)
            y_choice.append((best_y, j))
        children = {}
        for key, sub in realizable_answers(orders, domain, state):
            heads = []
            for h, a in enumerate(key):
                best_y, j = y_choice[h]
                s = head_scores[h][a]
                if not exact and s != best_y and abs(s - best_y) <= FLOAT_TIE_TOL:
                    raise AmbiguousOutputError("an x-token and a y-token tie within tolerance; use the rational backend")
                heads.append(machine.encoding[a] if s >= best_y else ys[j])
            y_next = layer_output_from_heads(layer, heads, last)
            children[key] = build(ys + [y_next], sub)
        query = HQuery(tuple(AQuery(domain, tuple(o)) for o in orders))
        return Node(query, children)

    return DecisionTree(domain, build([machine.eol], RestrictionState.full(domain)), layer.H)
