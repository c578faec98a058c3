import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rankcot.core import Domain, FunctionTable, build_comp_table, build_one_table
from rankcot.errors import InvalidArgumentError, ResourceError
from rankcot.rank import (
    common_top_element,
    is_close,
    mh_depth1_search,
    mh_rank_bruteforce,
    rank_exact_minimax,
    rank_exact_yesdepth,
)

B2 = Domain.binary(2)
XOR = FunctionTable(B2, [0, 1, 1, 0])


def _all_two_bit():
    return [FunctionTable(B2, list(bits)) for bits in itertools.product((0, 1), repeat=4)]


def test_constant_rank_zero():
    f = FunctionTable(Domain((3, 2)), [1] * 6)
    assert rank_exact_yesdepth(f).value == 0
    assert rank_exact_minimax(f).value == 0
    assert mh_rank_bruteforce(f, 3) == 0


def test_xor_rank_two():
    cert = rank_exact_yesdepth(XOR)
    assert cert.value == 2 and cert.witness.depth == 2 and cert.exhausted
    assert rank_exact_minimax(XOR).value == 2


def test_one_2_6_rank_two():
    assert rank_exact_yesdepth(build_one_table(6, 2)).value == 2


def test_minimax_small_families():
    assert rank_exact_minimax(build_one_table(2, 2)).value == 1
    assert rank_exact_minimax(build_comp_table(2, 1)).value == 1


def test_minimax_budget():
    with pytest.raises(ResourceError):
        rank_exact_minimax(FunctionTable(Domain.binary(4), [0] * 15 + [1]))


def test_yesdepth_budget():
    with pytest.raises(ResourceError):
        rank_exact_yesdepth(build_one_table(8, 2), budget=100)


def test_oracles_agree_on_two_bits():
    for f in _all_two_bit():
        a, b = rank_exact_yesdepth(f), rank_exact_minimax(f)
        assert a.value == b.value
        assert a.witness.table() == f and b.witness.table() == f
        assert mh_rank_bruteforce(f, 1) == a.value


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=8, max_size=8))
def test_oracles_agree_on_three_bits(bits):
    f = FunctionTable(Domain.binary(3), bits)
    assert rank_exact_yesdepth(f).value == rank_exact_minimax(f).value


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([(3,), (3, 2), (2, 3), (3, 3), (2, 2, 2), (2, 4)]), st.data())
def test_oracles_agree_beyond_binary(sizes, data):
    d = Domain(sizes, 3)
    outs = data.draw(st.lists(st.integers(0, 2), min_size=d.num_words, max_size=d.num_words))
    f = FunctionTable(d, outs)
    assert rank_exact_yesdepth(f).value == rank_exact_minimax(f).value


def test_mh_depth1_examples():
    found = mh_depth1_search(XOR, 2)
    assert found is not None and found.value == 1 and found.witness.table() == XOR
    assert mh_depth1_search(XOR, 1) is None
    one13 = build_one_table(3, 1)
    cert = mh_depth1_search(one13, 1)
    assert cert is not None and cert.witness.depth == 1
    again = mh_depth1_search(one13, 2)
    assert again is not None and again.witness.table() == one13


def test_mh_sandwich_two_bits():
    for f in _all_two_bit():
        r1 = rank_exact_minimax(f).value
        r2 = mh_rank_bruteforce(f, 2)
        assert r2 is not None
        assert r2 <= r1 <= 2 * r2
        assert mh_rank_bruteforce(f, 3) <= r2


def test_mh_unknown_beyond_depth():
    # XOR needs depth 2 with one head
    assert mh_rank_bruteforce(XOR, 1, max_depth=1) is None
    assert mh_rank_bruteforce(XOR, 1, max_depth=2) == 2


def test_is_close_examples():
    g = ("a", "b", "c", "d")
    assert is_close(g, g)
    # d sits at gamma-position 4 > 1 + sqrt(4), so this rotation is far
    assert not is_close(("d", "a", "b", "c"), g)
    assert is_close(("c", "a", "b", "d"), g)
    nine = tuple(range(1, 10))
    assert not is_close((9,) + tuple(range(1, 9)), nine)


def test_is_close_exact_sqrt_boundary():
    # |B| = 9: offset 3 allowed, offset 4 not
    g = tuple(range(9))
    assert is_close((3, 0, 1, 2, 4, 5, 6, 7, 8), g)
    assert not is_close((4, 0, 1, 2, 3, 5, 6, 7, 8), g)
    # |B| = 10: sqrt is irrational, offset 3 allowed
    g = tuple(range(10))
    assert is_close((3, 0, 1, 2) + tuple(range(4, 10)), g)


def test_common_top_examples():
    g = list(range(1, 21))
    assert common_top_element(g, [g, g, g]) == 1
    tau = list(range(1, 21))
    tau[0], tau[3] = tau[3], tau[0]
    # top half of tau is positions 1..10; its gamma-first element is 1 at tau-position 4
    assert common_top_element(g, [tau]) == 1
    with pytest.raises(InvalidArgumentError):
        common_top_element(g, [[20] + list(range(1, 20))])


def _close_perm(m, rng):
    gamma = list(range(m))
    while True:
        noise = rng.uniform(0, math.sqrt(m), size=m)
        tau = [int(x) for x in np.argsort(np.arange(m) + noise, kind="stable")]
        if is_close(tau, gamma):
            return tau


@pytest.mark.parametrize("h,m", [(1, 100), (2, 100), (3, 400)])
def test_common_top_counting_bound(h, m):
    rng = np.random.default_rng(h * 1000 + m)
    gamma = list(range(m))
    window = m // 2 + math.isqrt(m)
    for _ in range(100):
        taus = [_close_perm(m, rng) for _ in range(h)]
        x = common_top_element(gamma, taus)
        assert x is not None
        assert gamma.index(x) + 1 <= window
        assert all(t.index(x) + 1 <= m // 2 for t in taus)
        # every tau-top-half element lands in the gamma window, so marks pile up there
        marks = np.zeros(m, dtype=int)
        for t in taus:
            marks[t[: m // 2]] += 1
        assert marks[window:].sum() == 0
        assert marks.sum() == h * (m // 2) > (h - 1) * window
        assert (marks == h).any()
