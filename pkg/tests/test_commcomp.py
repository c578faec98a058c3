import itertools
import math

import numpy as np
import pytest

from rankcot.commcomp import (
    ALICE,
    BOB,
    PositionSplit,
    Protocol,
    Round,
    embed_pointer_chasing,
    full_disclosure_protocol,
    one_k_two_round,
    run_protocol,
    tree_to_protocol,
)
from rankcot.core import Domain, build_comp_table, comp_eval, one_eval
from rankcot.errors import InvalidArgumentError, ProtocolFault
from rankcot.trees import comp_tree, constant_tree, one_tree, random_tree


def _chase(fA, fB, t):
    """Alternate: Alice maps her pointer into Bob's half, Bob maps back."""
    m = len(fA)
    side, x = "A", 1
    for _ in range(t):
        if side == "A":
            x, side = fA[x - 1], "B"
        else:
            x, side = fB[x - 1], "A"
    return x + m if side == "B" else x


def test_zero_round_constant():
    p = Protocol(ALICE, (), lambda msgs: 7)
    out, tr = run_protocol(p, PositionSplit(3, {1}), (0, 1, 0))
    assert out == 7 and tr.length == 0


def test_full_disclosure():
    d = Domain((4, 3, 2), 5)
    split = PositionSplit(3, {1, 2, 3})
    fn = lambda w: (w[0] + w[1] * w[2]) % 5  # noqa: E731
    p = full_disclosure_protocol(d, split, fn)
    B = max(math.ceil(math.log2(s)) for s in d.sigma_sizes)
    assert p.total_bits == 3 * B
    for w in d.words():
        out, tr = run_protocol(p, split, w)
        assert out == fn(tuple(w)) and tr.length == 3 * B
    half = PositionSplit(3, {2})
    p = full_disclosure_protocol(d, half, fn)
    assert all(run_protocol(p, half, w)[0] == fn(tuple(w)) for w in d.words())


def test_message_length_fault():
    p = Protocol(ALICE, (Round(ALICE, 3, lambda msgs, half: "01"),), lambda msgs: 0)
    with pytest.raises(ProtocolFault):
        run_protocol(p, PositionSplit(2, {1}), (0, 1))


def test_rounds_must_alternate():
    r = Round(ALICE, 1, lambda msgs, half: "0")
    with pytest.raises(InvalidArgumentError):
        Protocol(ALICE, (r, r), lambda msgs: 0)


def test_split_validation():
    with pytest.raises(InvalidArgumentError):
        PositionSplit(3, {4})
    assert PositionSplit(4, {1, 3}).bob == frozenset({2, 4})


def test_one_2_8_protocol():
    tree = one_tree(8, 2)
    rng = np.random.default_rng(0)
    splits = [PositionSplit.prefix(8, 4), PositionSplit(8, {1, 3, 5, 7}), PositionSplit(8, set()),
              PositionSplit(8, set(range(1, 9)))]
    for split in splits:
        alice_first, bob_first = tree_to_protocol(tree, split)
        assert alice_first.first == ALICE and bob_first.first == BOB
        for p in (alice_first, bob_first):
            assert p.total_bits <= 2 * 1 * 2 * 4 and p.num_rounds <= 3
        for _ in range(125):
            w = tuple(int(x) for x in rng.integers(0, 2, size=8))
            outs = {run_protocol(p, split, w)[0] for p in (alice_first, bob_first)}
            assert outs == {one_eval(8, 2, w) - 1}
            assert run_protocol(alice_first, split, w)[1].length <= 16


def test_comp_2_6_protocol():
    tree = comp_tree(6, 2)
    split = PositionSplit.prefix(6, 3)
    p, _ = tree_to_protocol(tree, split)
    assert p.total_bits <= 2 * 2 * 6
    words = tree.domain.words()
    table = build_comp_table(6, 2)
    rng = np.random.default_rng(1)
    for i in rng.choice(len(words), size=2000, replace=False):
        assert run_protocol(p, split, words[i])[0] == table.outputs[i]


def test_depth_zero_protocol():
    tree = constant_tree(Domain.binary(3, 3), 2)
    p, q = tree_to_protocol(tree, PositionSplit(3, {1}))
    assert p.num_rounds == 0 and q.num_rounds == 0
    assert run_protocol(p, PositionSplit(3, {1}), (1, 0, 1))[0] == 2


def test_random_trees_bits_and_split_invariance():
    rng = np.random.default_rng(2)
    for _ in range(30):
        d = Domain(tuple(int(s) for s in rng.integers(1, 4, size=4)), 3)
        tree = random_tree(d, int(rng.integers(1, 4)), int(rng.integers(1, 3)), rng)
        A = d.num_assignments
        bound = 2 * tree.heads * tree.depth * math.ceil(math.log2(A))
        table = tree.table()
        for size in range(5):
            split = PositionSplit.prefix(4, size)
            for p in tree_to_protocol(tree, split):
                assert p.total_bits <= bound and p.num_rounds <= tree.depth + 1
                for i, w in enumerate(d.words()):
                    assert run_protocol(p, split, w)[0] == table.outputs[i]


def test_trace_dump():
    split = PositionSplit.prefix(8, 4)
    p, _ = tree_to_protocol(one_tree(8, 2), split)
    _, tr = run_protocol(p, split, (0, 1, 0, 0, 1, 0, 0, 0))
    rows = tr.dump(p)
    assert [r["speaker"] for r in rows] == [ALICE, BOB, ALICE]
    assert sum(r["bits"] for r in rows) == tr.length
    assert all("decoded" in r and "hex" in r for r in rows)


def test_pointer_chasing_examples():
    w, split = embed_pointer_chasing([1, 2, 3], [1, 2, 3])
    assert w == (4, 5, 6, 1, 2, 3) and split.alice == frozenset({1, 2, 3})
    assert comp_eval(6, 2, w) == _chase([1, 2, 3], [1, 2, 3], 2) == 1
    rng = np.random.default_rng(3)
    for _ in range(200):
        m = int(rng.integers(1, 9))
        fA = [int(x) for x in rng.integers(1, m + 1, size=m)]
        fB = [int(x) for x in rng.integers(1, m + 1, size=m)]
        w, _ = embed_pointer_chasing(fA, fB)
        assert comp_eval(2 * m, 1, w) == fA[0] + m
        for t in range(1, 5):
            assert comp_eval(2 * m, t, w) == _chase(fA, fB, t)
    with pytest.raises(InvalidArgumentError):
        embed_pointer_chasing([1, 2], [3, 1])


def test_one_k_two_round_examples():
    split = PositionSplit.prefix(6, 3)
    p = one_k_two_round(6, 2, split)
    assert run_protocol(p, split, (0,) * 6)[0] == 6  # code n means n + 1
    q = one_k_two_round(6, 1, split)
    assert q.num_rounds == 2
    assert run_protocol(q, split, (0, 0, 0, 0, 1, 0))[0] == 4


@pytest.mark.parametrize("n", range(1, 13))
def test_one_k_two_round_exhaustive(n):
    words = list(itertools.product((0, 1), repeat=n))
    for k in range(1, 4):
        for size in {n // 2, (n + 1) // 2}:
            split = PositionSplit.prefix(n, size)
            p = one_k_two_round(n, k, split)
            assert p.total_bits <= 2 * k * math.ceil(math.log2(n + 1))
            for w in words:
                assert run_protocol(p, split, w)[0] == one_eval(n, k, w) - 1
