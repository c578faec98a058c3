import itertools

import pytest

from rankcot.core import Domain, FunctionTable
from rankcot.errors import InvalidArgumentError, ResourceError
from rankcot.hardness import (
    NAEFormula,
    OrderPair,
    SetFamilyInstance,
    gadget_orders,
    gadget_rows,
    gadget_sample,
    maxima_pair,
    orders_from_assignment,
    reduce_2order_to_sample,
    reduce_nae_to_2order,
    sample_orders_from_pair,
    sample_separates,
    separates,
    tree_from_orders,
    two_order_separable_bruteforce,
    worked_instance,
)
from rankcot.learning import Sample
from rankcot.trees import AQuery


def _inst(U, F, G):
    return SetFamilyInstance(tuple(U), tuple(map(frozenset, F)), tuple(map(frozenset, G)))


def test_maxima_pair_examples():
    orders = OrderPair(("u", "w", "0", "x", "v"), ("v", "w", "x", "0", "u"))
    assert maxima_pair({"u"}, orders) == ("u", "u")
    assert maxima_pair(set(orders.first), orders) == ("u", "v")
    assert maxima_pair({"u", "x", "0"}, orders)[0] == "u"
    with pytest.raises(InvalidArgumentError):
        maxima_pair(set(), orders)


def test_separates_examples():
    U = ("u", "v")
    orders = OrderPair(U, U)
    assert separates(orders, _inst(U, [{"u"}], []))
    assert not separates(orders, _inst(U, [{"u"}], [{"u"}]))


def test_worked_instance_is_inseparable():
    inst = worked_instance()
    assert inst.universe == ("u", "v", "w")
    assert two_order_separable_bruteforce(inst) is None
    for p1 in itertools.permutations(inst.universe):
        for p2 in itertools.permutations(inst.universe):
            assert not separates(OrderPair(p1, p2), inst)


def test_bruteforce_found_and_budget():
    inst = _inst(("u", "v"), [{"u"}], [{"v"}])
    pair = two_order_separable_bruteforce(inst)
    assert pair is not None and separates(pair, inst)
    big = _inst(tuple("abcdefg"), [{"a"}], [{"b"}])
    with pytest.raises(ResourceError):
        two_order_separable_bruteforce(big)


def test_reduction_counts():
    one = reduce_nae_to_2order(NAEFormula(1, ()))
    assert (len(one.universe), len(one.F), len(one.G)) == (5, 3, 4)
    three = reduce_nae_to_2order(NAEFormula(3, ((1, 2, 3),)))
    assert (len(three.universe), len(three.F), len(three.G)) == (16, 12, 16)
    assert all("0" in s for s in three.F)


def test_one_variable_bruteforce_finds_pair():
    inst = reduce_nae_to_2order(NAEFormula(1, ()))
    pair = two_order_separable_bruteforce(inst)
    assert pair is not None and separates(pair, inst)
    for x in (0, 1):
        assert separates(orders_from_assignment(NAEFormula(1, ()), [x]), inst)


def test_orders_from_assignment():
    phi = NAEFormula(3, ((1, 2, 3),))
    inst = reduce_nae_to_2order(phi)
    assert separates(orders_from_assignment(phi, [1, 1, 0]), inst)
    with pytest.raises(InvalidArgumentError):
        orders_from_assignment(phi, [1, 1, 1])


@pytest.mark.parametrize("clauses", [(), ((1, 2, 3),), ((1, 2, 3), (3, 1, 2))])
def test_forward_soundness(clauses):
    phi = NAEFormula(3, clauses)
    inst = reduce_nae_to_2order(phi)
    S = reduce_2order_to_sample(inst)
    sats = phi.satisfying_assignments()
    assert sats
    for a in sats:
        pair = orders_from_assignment(phi, a)
        assert separates(pair, inst)
        lifted = sample_orders_from_pair(inst, pair)
        assert sample_separates(lifted, S)
        tree = tree_from_orders(lifted, S)
        assert S.consistent_with(tree)


def test_nae_parse_round_trip():
    phi = NAEFormula.parse("c demo\np nae3 4 2\n1 2 3 0\n2 3 4\n")
    assert phi.clauses == ((1, 2, 3), (2, 3, 4))
    assert NAEFormula.parse(phi.to_text()) == phi
    with pytest.raises(InvalidArgumentError):
        NAEFormula.parse("p nae3 3 1\n1 -2 3\n")
    with pytest.raises(InvalidArgumentError):
        NAEFormula(3, ((1, 1, 2),))


def test_gadget_rows():
    for U in range(1, 5):
        pos, neg = gadget_rows(U)
        work = 3 * U
        assert len(pos) == len(neg) == work + 1 + 2
        assert (0, 1, 0) + (0,) * work in pos
        assert (1, 0, 0) + (0,) * work in neg
        assert pos[-2:] == [(1, 0, 1) + (1,) * work, (0, 1, 1) + (1,) * work]
        assert neg[-2:] == [(1, 1, 1) + (1,) * work, (0, 0, 1) + (1,) * work]


def test_gadget_orders():
    for U in range(1, 5):
        orders = gadget_orders(U)
        S = gadget_sample(U)
        assert sample_separates(orders, S)
        d = S.domain
        q1, q2 = AQuery(d, orders.first), AQuery(d, orders.second)
        ones = (1,) * (3 * U + 3)
        assert (q1.eval(ones), q2.eval(ones)) == ((1, 1), (2, 1))
        low = (0, 0) + (1,) * (3 * U + 1)
        assert q1.eval(low) == q2.eval(low) == (3, 1)


def test_sample_separates_examples():
    d = Domain.binary(2)
    orders = OrderPair(tuple(range(4)), tuple(range(4)))
    assert sample_separates(orders, Sample(d, (((0, 1), 1),)))
    xor = Sample.from_table(FunctionTable(d, [0, 1, 1, 0]))
    reveal = OrderPair((0, 1, 2, 3), (2, 3, 0, 1))
    assert sample_separates(reveal, xor)
    assert xor.consistent_with(tree_from_orders(reveal, xor))
    bad = Sample(d, (((0, 1), 1), ((0, 1), 0)))
    for p in itertools.permutations(range(4)):
        assert not sample_separates(OrderPair(p, p), bad)


def test_instance_json_round_trip():
    inst = reduce_nae_to_2order(NAEFormula(2, ()))
    assert SetFamilyInstance.from_json(inst.to_json()) == inst
