import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from rankcot.compiler import compile_tree
from rankcot.core import Domain, comp_eval
from rankcot.decoder import (
    AttentionLayer,
    DecoderMachine,
    OutputMap,
    attention_scores,
    build_comp_decoder,
    decoder_compute,
    decoder_run,
    decoder_run_batch,
    layer_apply,
    leftmost_argmax,
    read_outputs,
)
from rankcot.errors import AmbiguousOutputError, InvalidArgumentError
from rankcot.trees import one_tree, random_tree


def _layer(d, Q, K, W_O, W1, W2, H=1, backend="float"):
    return AttentionLayer(d, H, (Q,) * H, (K,) * H, (W_O,) * H, W1, W2, backend)


def test_zero_layer():
    Z = np.zeros((3, 3))
    layer = _layer(3, Z, Z, Z, Z, Z)
    seq = [np.array([1.0, 2.0, 3.0]), np.array([0.0, 1.0, 0.0])]
    assert attention_scores(layer, 0, seq) == [0.0, 0.0]
    assert np.array_equal(layer_apply(layer, seq), np.zeros(3))


def test_identity_layer():
    I = np.eye(2)
    layer = _layer(2, I, I, I, I, I)
    seq = [(1.0, 0.0), (0.0, 1.0)]
    assert attention_scores(layer, 0, seq) == [0.0, 1.0]
    assert layer_apply(layer, seq).tolist() == [0.0, 2.0]


def test_identity_layer_rational():
    I = [[1, 0], [0, 1]]
    layer = _layer(2, I, I, I, I, I, backend="rational")
    out = layer_apply(layer, [[1, 0], [0, 1]])
    assert out == {1: Fraction(2)}


def test_leftmost_tie():
    assert leftmost_argmax([0.5, 1.0, 1.0]) == 1
    assert leftmost_argmax([1.0, 1.0 - 1e-12, 0.2]) == 0
    assert leftmost_argmax([1.0 - 1e-12, 1.0], exact=True) == 1
    I = np.eye(2)
    layer = _layer(2, I, I, I, I, I)
    # tokens 0 and 2 both score 1 against the last token; the head takes token 0
    seq = [(1.0, 0.0), (0.0, 0.0), (1.0, 0.0)]
    assert layer_apply(layer, seq).tolist() == [2.0, 0.0]


def test_dimension_mismatch():
    I = np.eye(2)
    layer = _layer(2, I, I, I, I, I)
    with pytest.raises(InvalidArgumentError):
        attention_scores(layer, 0, [(1.0, 0.0, 0.0)])
    with pytest.raises(InvalidArgumentError):
        attention_scores(layer, 1, [(1.0, 0.0)])
    with pytest.raises(InvalidArgumentError):
        _layer(2, np.eye(3), I, I, I, I)


def test_comp_decoder_examples():
    m = build_comp_decoder(5, 2)
    assert m.d == 6 and m.H == 1
    w = (2, 3, 1, 5, 4)
    codes = tuple(x - 1 for x in w)
    trace = decoder_run(m, codes, 2)
    assert abs(trace.final[5] - 3) < 1e-9
    assert decoder_compute(m, codes) + 1 == 3
    for t in range(1, 5):
        assert decoder_compute(build_comp_decoder(4, t), (0, 1, 2, 3)) == 0


def test_comp_decoder_scores_are_cosines():
    n, t = 6, 3
    m = build_comp_decoder(n, t)
    rng = np.random.default_rng(0)
    for _ in range(50):
        w = tuple(int(x) for x in rng.integers(1, n + 1, size=n))
        trace = decoder_run(m, tuple(x - 1 for x in w), t)
        for ell in range(t):
            cur = comp_eval(n, ell, w)
            scores = trace.scores[ell][0]
            for i in range(1, n + 1):
                assert abs(scores[i - 1] - math.cos(i - cur)) < 1e-12
            assert trace.heads[ell][0] == cur - 1


def test_comp_decoder_t1_is_one_layer_apply():
    m = build_comp_decoder(4, 1)
    w = (2, 0, 3, 1)
    seq = [m.encoding[m.domain.offsets[i] + x] for i, x in enumerate(w)] + [m.eol]
    assert np.allclose(decoder_run(m, w, 1).final, layer_apply(m.layer, seq))


@pytest.mark.parametrize("n", range(1, 7))
def test_comp_decoder_exhaustive(n):
    for t in range(1, 4):
        m = build_comp_decoder(n, t)
        words = m.domain.words()
        got = read_outputs(m, decoder_run_batch(m, words)[:, -1, :])
        expected = [comp_eval(n, t, w + 1) - 1 for w in words]
        assert got.tolist() == expected


def test_batch_matches_single_run():
    m = build_comp_decoder(5, 3)
    rng = np.random.default_rng(1)
    words = rng.integers(0, 5, size=(30, 5))
    batch = decoder_run_batch(m, words)
    for w, ys in zip(words, batch):
        trace = decoder_run(m, w)
        assert np.allclose(np.stack(trace.ys[1:]), ys)


def test_comp_score_gap():
    # the losing scores are cos(k) for 1 <= |k| <= n - 1; for n <= 32 the worst is cos(25)
    worst = max(math.cos(k) for k in range(1, 32))
    assert abs(worst - math.cos(25)) < 1e-15
    assert 1 - worst > 8e-3
    assert max(math.cos(k) for k in range(1, 6)) == math.cos(1)


def test_zeroed_w2_gives_constant():
    tree = one_tree(4, 1)
    m = compile_tree(tree)
    layer = m.layer
    zero = AttentionLayer(layer.d, layer.H, layer.Q, layer.K, layer.W_O, layer.W1,
                          [[0] * layer.d for _ in range(layer.d)], "rational")
    m0 = DecoderMachine(m.domain, zero, m.encoding, m.eol,
                        OutputMap.read(0, base=0), m.iterations)
    assert {decoder_compute(m0, w) for w in m.domain.words()} == {0}


def test_output_map_ambiguity():
    om = OutputMap.argmax([0, 1], [0, 1])
    with pytest.raises(AmbiguousOutputError):
        om.apply(np.array([1.0, 1.0]), 2)
    with pytest.raises(AmbiguousOutputError):
        OutputMap.read(0).apply(np.array([0.4]), 2)
    assert OutputMap.read(0, base=1).apply(np.array([2.0000001]), 3) == 1


def test_backends_agree_on_compiled_machines():
    rng = np.random.default_rng(2)
    for _ in range(20):
        d = Domain(tuple(int(s) for s in rng.integers(1, 4, size=3)), 3)
        tree = random_tree(d, 2, int(rng.integers(1, 3)), rng)
        exact = compile_tree(tree)
        flt = exact.to_backend("float")
        for w in d.words():
            a, b = decoder_run(exact, w), decoder_run(flt, w)
            assert a.heads == b.heads
            assert decoder_compute(exact, w) == decoder_compute(flt, w)


def test_trace_replay_is_exact():
    m = compile_tree(random_tree(Domain((2, 3)), 3, 2, np.random.default_rng(4)))
    for w in m.domain.words():
        trace = decoder_run(m, w)
        n = trace.n
        for t in range(1, m.iterations + 1):
            assert layer_apply(m.layer, list(trace.tokens[: n + t])) == trace.tokens[n + t]


def test_permuting_later_ties_keeps_head():
    I = np.eye(2)
    layer = _layer(2, I, I, I, I, I)
    base = [(1.0, 0.0), (0.0, 1.0), (1.0, 0.0), (0.5, 0.0), (1.0, 0.0)]
    head_first = layer_apply(layer, base)
    for perm in itertools.permutations(base[1:4]):
        assert np.array_equal(layer_apply(layer, [base[0], *perm, base[4]]), head_first)


def test_machine_json_round_trip():
    m = compile_tree(one_tree(4, 2))
    back = DecoderMachine.from_json(m.to_json())
    assert back.to_json() == m.to_json()
    for w in m.domain.words():
        assert decoder_compute(back, w) == decoder_compute(m, w)
    c = build_comp_decoder(3, 2)
    back = DecoderMachine.from_json(c.to_json())
    assert [decoder_compute(back, w) for w in c.domain.words()] == [decoder_compute(c, w) for w in c.domain.words()]
