"""Two-party protocols where Alice holds some positions of the word and Bob the rest.

A :class:`Protocol` is a list of rounds with alternating speakers; each round
has a fixed message length and a function from (messages so far, own half of
the word) to a bit string. Outputs are letter codes of the function computed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .core import Domain, InvalidArgumentError, one_domain
from .errors import MalformedTreeError, ProtocolFault
from .trees import DecisionTree, Leaf, Node

ALICE, BOB = "alice", "bob"


def _other(speaker: str) -> str:
    return BOB if speaker == ALICE else ALICE


@dataclass(frozen=True)
class PositionSplit:
    n: int
    alice: frozenset  # 1-based positions Alice knows; Bob knows the rest

    def __post_init__(self):
        alice = frozenset(int(p) for p in self.alice)
        if any(not 1 <= p <= self.n for p in alice):
            raise InvalidArgumentError(f"split positions must lie in 1..{self.n}")
        object.__setattr__(self, "alice", alice)

    @property
    def bob(self) -> frozenset:
        return frozenset(range(1, self.n + 1)) - self.alice

    def positions(self, speaker: str) -> frozenset:
        return self.alice if speaker == ALICE else self.bob

    def half(self, speaker: str, word: Sequence[int]) -> dict[int, int]:
        return {p: int(word[p - 1]) for p in sorted(self.positions(speaker))}

    @classmethod
    def prefix(cls, n: int, size: int) -> "PositionSplit":
        return cls(n, frozenset(range(1, size + 1)))


MessageFn = Callable[[list[str], dict[int, int]], str]


@dataclass(frozen=True)
class Round:
    speaker: str
    length: int
    message: MessageFn


@dataclass(frozen=True)
class Protocol:
    first: str
    rounds: tuple[Round, ...]
    out: Callable[[list[str]], int]
    describe: Optional[Callable[[int, str], object]] = None  # decode a round's message for dumps

    def __post_init__(self):
        if self.first not in (ALICE, BOB):
            raise InvalidArgumentError("first speaker must be 'alice' or 'bob'")
        speaker = self.first
        for r in self.rounds:
            if r.speaker != speaker:
                raise InvalidArgumentError("rounds must alternate speakers starting with the first speaker")
            speaker = _other(speaker)

    @property
    def num_rounds(self) -> int:
        return len(self.rounds)

    @property
    def total_bits(self) -> int:
        return sum(r.length for r in self.rounds)


@dataclass(frozen=True)
class Transcript:
    speakers: tuple[str, ...]
    messages: tuple[str, ...]

    @property
    def bits(self) -> str:
        return "".join(self.messages)

    @property
    def length(self) -> int:
        return len(self.bits)

    def dump(self, protocol: Optional[Protocol] = None) -> list[dict]:
        rows = []
        for i, (who, msg) in enumerate(zip(self.speakers, self.messages)):
            row = {"round": i + 1, "speaker": who, "bits": len(msg),
                   "hex": format(int(msg, 2), f"0{math.ceil(len(msg) / 4)}x") if msg else ""}
            if protocol is not None and protocol.describe is not None:
                row["decoded"] = protocol.describe(i, msg)
            rows.append(row)
        return rows


def run_protocol(p: Protocol, split: PositionSplit, w: Sequence[int]) -> tuple[int, Transcript]:
    """Execute the rounds; each party sees only its own half and the messages so far."""
    if len(w) != split.n:
        raise InvalidArgumentError(f"word length {len(w)} differs from split n={split.n}")
    halves = {ALICE: split.half(ALICE, w), BOB: split.half(BOB, w)}
    messages: list[str] = []
    for i, r in enumerate(p.rounds):
        msg = r.message(list(messages), halves[r.speaker])
        if len(msg) != r.length or any(c not in "01" for c in msg):
            raise ProtocolFault(f"round {i + 1}: expected {r.length} bits, got {msg!r}")
        messages.append(msg)
    return p.out(messages), Transcript(tuple(r.speaker for r in p.rounds), tuple(messages))


def _bits(value: int, width: int) -> str:
    return format(value, f"0{width}b") if width else ""


def _unbits(text: str) -> int:
    return int(text, 2) if text else 0


# ---------------------------------------------------------------------------
# tree -> protocol
# ---------------------------------------------------------------------------

def field_width(domain: Domain) -> int:
    """Bits per head and party: enough for any rank in an order of ``|A|`` assignments."""
    return math.ceil(math.log2(domain.num_assignments)) if domain.num_assignments > 1 else 0


def _tree_protocol(tree: DecisionTree, split: PositionSplit, first: str) -> Protocol:
    domain, H = tree.domain, tree.heads
    if split.n != domain.n:
        raise InvalidArgumentError("split and tree disagree on n")
    r = tree.depth
    B = field_width(domain)
    none = (1 << B) - 1
    # slots: (query index, speaker); query j opens with `first` when j is even
    slots = []
    for j in range(r):
        opener = first if j % 2 == 0 else _other(first)
        slots += [(j, opener), (j, _other(opener))]
    grouped: list[list[tuple[int, str]]] = []
    for slot in slots:
        if grouped and grouped[-1][0][1] == slot[1]:
            grouped[-1].append(slot)
        else:
            grouped.append([slot])
    slot_rounds = [g for g in grouped]

    def parse(messages: list[str]) -> dict[tuple[int, str], list[int]]:
        fields = {}
        for msg, group in zip(messages, slot_rounds):
            for k, slot in enumerate(group):
                chunk = msg[k * H * B:(k + 1) * H * B]
                fields[slot] = [_unbits(chunk[h * B:(h + 1) * B]) for h in range(H)]
        return fields

    def node_at(j: int, fields) -> object:
        node = tree.root
        for i in range(j):
            if isinstance(node, Leaf):
                return node
            key = []
            for h, part in enumerate(node.query.parts):
                rank = min(fields[(i, ALICE)][h], fields[(i, BOB)][h])
                key.append(part.order[rank])
            key = tuple(key)
            if key not in node.children:
                raise MalformedTreeError(f"tree has no child for answer {key} at depth {i}")
            node = node.children[key]
        return node

    def own_fields(node, half: dict[int, int]) -> list[int]:
        if isinstance(node, Leaf):
            return [0] * H
        out = []
        for part in node.query.parts:
            ranks = [int(part.rank[domain.offsets[p - 1] + x]) for p, x in half.items()]
            out.append(min(ranks) if ranks else none)
        return out

    def make_message(group):
        def message(messages: list[str], half: dict[int, int]) -> str:
            fields = parse(messages)
            text = ""
            for slot in group:
                mine = own_fields(node_at(slot[0], fields), half)
                fields[slot] = mine
                text += "".join(_bits(v, B) for v in mine)
            return text
        return message

    def out(messages: list[str]) -> int:
        node = node_at(r, parse(messages))
        if not isinstance(node, Leaf):
            raise MalformedTreeError("transcript ended inside the tree")
        return node.output

    def describe(i: int, msg: str):
        group = slot_rounds[i]
        return [{"query": j + 1, "ranks": [_unbits(msg[k * H * B + h * B:k * H * B + (h + 1) * B]) for h in range(H)]}
                for k, (j, _) in enumerate(group)]

    rounds = tuple(Round(g[0][1], len(g) * H * B, make_message(g)) for g in slot_rounds)
    start = rounds[0].speaker if rounds else first
    const = tree.root.output if isinstance(tree.root, Leaf) else None
    return Protocol(start, rounds, (lambda m: const) if r == 0 else out, describe)


def tree_to_protocol(tree: DecisionTree, split: PositionSplit) -> tuple[Protocol, Protocol]:
    """Alice-first and Bob-first protocols computing ``tree``.

    For every a-query both parties send, per head, the rank of their best own
    consistent assignment (all ones when they have none); the smaller rank
    wins. The first speaker alternates from query to query so that adjacent
    messages of one party merge: ``depth + 1`` rounds, ``2 H depth ceil(log2 |A|)`` bits.
    """
    return _tree_protocol(tree, split, ALICE), _tree_protocol(tree, split, BOB)


# ---------------------------------------------------------------------------
# pointer chasing and the k-th one
# ---------------------------------------------------------------------------

def embed_pointer_chasing(fA: Sequence[int], fB: Sequence[int]) -> tuple[tuple[int, ...], PositionSplit]:
    """Word for ``comp`` on ``n = 2m`` (values 1-based) with Alice holding the first half.

    Position ``i <= m`` points to ``fA(i) + m`` and position ``m + i`` points to ``fB(i)``.
    """
    m = len(fA)
    if len(fB) != m or m < 1:
        raise InvalidArgumentError("fA and fB must both be total on 1..m")
    if any(not 1 <= x <= m for x in (*fA, *fB)):
        raise InvalidArgumentError("pointer values must lie in 1..m")
    word = tuple(int(x) + m for x in fA) + tuple(int(x) for x in fB)
    return word, PositionSplit.prefix(2 * m, m)


def one_k_two_round(n: int, k: int, split: PositionSplit, first: str = ALICE) -> Protocol:
    """Each party sends its first ``k`` one-positions; the output is the ``k``-th overall.

    Positions are sent as ``p - 1`` in ``ceil(log2(n + 1))`` bits, padded with the
    sentinel ``n`` (meaning "none"). The output is a letter code: ``n`` for "fewer than k ones".
    """
    if k < 1 or split.n != n:
        raise InvalidArgumentError("need k >= 1 and a split over n positions")
    B = math.ceil(math.log2(n + 1))

    def message(messages, half):
        ones = [p for p, x in sorted(half.items()) if x == 1][:k]
        codes = [p - 1 for p in ones] + [n] * (k - len(ones))
        return "".join(_bits(c, B) for c in codes)

    def decode(msg):
        return [_unbits(msg[i * B:(i + 1) * B]) for i in range(k)]

    def out(messages):
        found = sorted(c for msg in messages for c in decode(msg) if c < n)
        return found[k - 1] if len(found) >= k else n

    rounds = (Round(first, k * B, message), Round(_other(first), k * B, message))
    return Protocol(first, rounds, out, lambda i, msg: [c + 1 for c in decode(msg)])


def full_disclosure_protocol(domain: Domain, split: PositionSplit, fn: Callable[[tuple], int]) -> Protocol:
    """Both parties send all their letters in ``max ceil(log2 |Sigma_i|)`` bits each; ``fn`` runs on the result."""
    if split.n != domain.n:
        raise InvalidArgumentError("split and domain disagree on n")
    B = max(math.ceil(math.log2(s)) if s > 1 else 0 for s in domain.sigma_sizes)
    order = {ALICE: sorted(split.alice), BOB: sorted(split.bob)}

    def send(messages, half):
        return "".join(_bits(x, B) for _, x in sorted(half.items()))

    def out(messages):
        word = [0] * domain.n
        for who, msg in zip((ALICE, BOB), messages):
            for i, p in enumerate(order[who]):
                word[p - 1] = _unbits(msg[i * B:(i + 1) * B])
        return int(fn(tuple(word)))

    rounds = (Round(ALICE, len(order[ALICE]) * B, send), Round(BOB, len(order[BOB]) * B, send))
    return Protocol(ALICE, rounds, out)
