"""Command-line entry point: ``rankcot <subcommand> ...``.

Machine-readable results go to stdout as JSON (or a bare integer for ``rank``);
diagnostics go to stderr. Exit codes: 0 success, 1 negative answer (Unsat,
None, false), 2 usage or input error, 3 resource budget exceeded.

Words are given as comma-separated 0-based letter codes, e.g. ``--word 0,1,1``.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

import numpy as np

from .commcomp import ALICE, BOB, PositionSplit, run_protocol, tree_to_protocol
from .compiler import compile_tree, extract_tree
from .core import Domain, FunctionTable, build_comp_table, build_one_table
from .decoder import DecoderMachine, build_comp_decoder, decoder_compute
from .errors import RankCotError, ResourceError
from .hardness import (
    NAEFormula,
    SetFamilyInstance,
    gadget_orders,
    gadget_sample,
    reduce_2order_to_sample,
    reduce_nae_to_2order,
    sample_separates,
    two_order_separable_bruteforce,
    worked_instance,
)
from .learning import Sample, SampleSource, pac_learn, solve_consistency
from .rank import mh_rank_bruteforce, rank_exact_minimax, rank_exact_yesdepth
from .trees import DecisionTree, comp_tree, one_tree, random_tree

OK, NEGATIVE, USAGE, RESOURCE = 0, 1, 2, 3


class _Negative(Exception):
    """Raised by a handler after printing a negative answer."""


# -- I/O helpers --------------------------------------------------------------

def _read_json(path: str):
    text = sys.stdin.read() if path == "-" else open(path, encoding="utf-8").read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise RankCotError(f"{path}: not valid JSON ({exc})") from None


def _emit(args, obj) -> None:
    text = obj if isinstance(obj, str) else json.dumps(obj, sort_keys=True)
    if getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _word(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",")) if text else ()
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated word: {text!r}") from None


def _positions(text: str) -> frozenset:
    return frozenset(_word(text))


def _load_function(data) -> FunctionTable:
    """Accept either a function table or a tree (tabulated)."""
    if "outputs" in data:
        return FunctionTable.from_json(data)
    if "root" in data:
        return DecisionTree.from_json(data).table()
    raise RankCotError("expected a function table or a tree JSON")


def _words(args, domain: Domain) -> list[tuple[int, ...]]:
    words = list(args.word or [])
    if args.words:
        words += [tuple(int(x) for x in w) for w in _read_json(args.words)]
    if not words:
        raise RankCotError("give at least one --word or a --words file")
    return [domain.check_word(w) for w in words]


# -- handlers -----------------------------------------------------------------

def cmd_eval(args) -> None:
    if args.tree:
        tree = DecisionTree.from_json(_read_json(args.tree))
        run = tree.eval
        domain = tree.domain
    else:
        machine = DecoderMachine.from_json(_read_json(args.machine))
        domain = machine.domain
        run = lambda w: decoder_compute(machine, w, exact=args.exact)  # noqa: E731
    _emit(args, [{"word": list(w), "output": int(run(w))} for w in _words(args, domain)])


def cmd_compile(args) -> None:
    machine = compile_tree(DecisionTree.from_json(_read_json(args.tree)))
    if args.backend == "float":
        machine = machine.to_backend("float")
    _emit(args, machine.to_json())


def cmd_extract(args) -> None:
    machine = DecoderMachine.from_json(_read_json(args.machine))
    _emit(args, extract_tree(machine, args.t).to_json())


def cmd_rank(args) -> None:
    f = _load_function(_read_json(args.input))
    if args.method == "yesdepth":
        value = rank_exact_yesdepth(f).value
    elif args.method == "minimax":
        value = rank_exact_minimax(f, max_A=args.max_assignments).value
    else:
        value = mh_rank_bruteforce(f, args.heads, max_depth=args.max_depth, max_A=args.max_assignments)
        if value is None:
            _emit(args, "None")
            raise _Negative
    _emit(args, str(value))


def cmd_consistency(args) -> None:
    result = solve_consistency(Sample.from_json(_read_json(args.sample)), args.k)
    if not result.ok:
        _emit(args, result.reason)
        raise _Negative
    _emit(args, result.tree.to_json())


def cmd_learn(args) -> None:
    rng = np.random.default_rng(args.seed)
    if args.target:
        target = DecisionTree.from_json(_read_json(args.target))
    else:
        target = random_tree(Domain.binary(args.n), args.k, 1, rng)
    res = pac_learn(SampleSource(target.domain, target, seed=args.seed), args.k, args.eps, args.delta)
    if not res.ok:
        _emit(args, {"sample_size": res.sample_size, "result": res.consistency.reason})
        raise _Negative
    err = SampleSource(target.domain, target).true_error(res.tree)
    _emit(args, {"sample_size": res.sample_size, "true_error": err, "tree": res.tree.to_json()})


def cmd_reduce_nae(args) -> None:
    text = sys.stdin.read() if args.formula == "-" else open(args.formula, encoding="utf-8").read()
    inst = reduce_nae_to_2order(NAEFormula.parse(text))
    _emit(args, reduce_2order_to_sample(inst).to_json() if args.sample else inst.to_json())


def cmd_separate(args) -> None:
    inst = SetFamilyInstance.from_json(_read_json(args.instance)) if args.instance else worked_instance()
    pair = two_order_separable_bruteforce(inst, max_U=args.max_universe)
    if pair is None:
        _emit(args, "None")
        raise _Negative
    _emit(args, pair.to_json())


def cmd_gadget_verify(args) -> None:
    rows = []
    for U in range(1, args.max_universe + 1):
        orders = gadget_orders(U)
        rows.append({"universe_size": U, "separates": sample_separates(orders, gadget_sample(U))})
    _emit(args, rows)
    if not all(r["separates"] for r in rows):
        raise _Negative


def cmd_protocol(args) -> None:
    tree = DecisionTree.from_json(_read_json(args.tree))
    split = PositionSplit(tree.domain.n, args.alice)
    alice_first, bob_first = tree_to_protocol(tree, split)
    proto = alice_first if args.first == ALICE else bob_first
    if args.action == "compile":
        _emit(args, {"first": proto.first, "rounds": [{"speaker": r.speaker, "bits": r.length} for r in proto.rounds],
                     "total_bits": proto.total_bits})
        return
    out = []
    for w in _words(args, tree.domain):
        value, transcript = run_protocol(proto, split, w)
        row = {"word": list(w), "output": int(value), "bits": transcript.length}
        if args.trace:
            row["trace"] = transcript.dump(proto)
        out.append(row)
    _emit(args, out)


def cmd_family(args) -> None:
    if args.family == "comp":
        if args.t is None:
            raise RankCotError("family comp needs --t")
        table, tree = (lambda: build_comp_table(args.n, args.t)), (lambda: comp_tree(args.n, args.t))
        decoder = lambda: build_comp_decoder(args.n, args.t)  # noqa: E731
    else:
        if args.k is None:
            raise RankCotError("family one needs --k")
        table, tree = (lambda: build_one_table(args.n, args.k)), (lambda: one_tree(args.n, args.k))
        decoder = lambda: compile_tree(one_tree(args.n, args.k))  # noqa: E731
    _emit(args, {"table": table, "tree": tree, "decoder": decoder}[args.emit]().to_json())


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rankcot", description="Rank of decision trees over a-queries, "
                                "hard-attention decoders, learning and protocols.")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    sub = p.add_subparsers(dest="command", required=True)

    def with_output(sp):
        sp.add_argument("-o", "--output", help="write to this file instead of stdout")
        return sp

    def with_words(sp):
        sp.add_argument("--word", type=_word, action="append", help="comma-separated letters; repeatable")
        sp.add_argument("--words", help="JSON file holding a list of words")
        return sp

    sp = with_words(with_output(sub.add_parser("eval", help="evaluate a tree or a machine on words")))
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--tree")
    src.add_argument("--machine")
    sp.add_argument("--exact", action="store_true", help="rational arithmetic for float machines")
    sp.set_defaults(func=cmd_eval)

    sp = with_output(sub.add_parser("compile", help="compile a tree into a decoder machine"))
    sp.add_argument("--tree", required=True)
    sp.add_argument("--backend", choices=("rational", "float"), default="rational")
    sp.set_defaults(func=cmd_compile)

    sp = with_output(sub.add_parser("extract", help="read a machine back as a tree"))
    sp.add_argument("--machine", required=True)
    sp.add_argument("--t", type=int, default=None, help="iterations (default: the machine's own)")
    sp.set_defaults(func=cmd_extract)

    sp = with_output(sub.add_parser("rank", help="exact rank of a function table or tree"))
    sp.add_argument("method", choices=("yesdepth", "minimax", "mh"))
    sp.add_argument("input", nargs="?", default="-", help="JSON file or '-' for stdin")
    sp.add_argument("--heads", type=int, default=2)
    sp.add_argument("--max-depth", type=int, default=2)
    sp.add_argument("--max-assignments", type=int, default=6)
    sp.set_defaults(func=cmd_rank)

    sp = with_output(sub.add_parser("consistency", help="rank-k consistent tree for a sample"))
    sp.add_argument("--sample", required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.set_defaults(func=cmd_consistency)

    sp = with_output(sub.add_parser("learn", help="PAC-learn a hidden rank-k tree"))
    sp.add_argument("--target", help="tree JSON; default is a random rank-k tree on --n bits")
    sp.add_argument("--n", type=int, default=6)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--delta", type=float, default=0.1)
    sp.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="RNG seed (default 0)")
    sp.set_defaults(func=cmd_learn)

    sp = with_output(sub.add_parser("reduce-nae", help="NAE formula to 2-order instance (or sample)"))
    sp.add_argument("formula", help="'p nae3 n m' text file or '-'")
    sp.add_argument("--sample", action="store_true", help="continue to the 2-head rank-1 sample")
    sp.set_defaults(func=cmd_reduce_nae)

    sp = with_output(sub.add_parser("separate", help="brute-force 2-order separability"))
    sp.add_argument("--instance", help="instance JSON; default is the bundled worked instance")
    sp.add_argument("--max-universe", type=int, default=6)
    sp.set_defaults(func=cmd_separate)

    sp = with_output(sub.add_parser("gadget-verify", help="check the gadget orders separate the gadget"))
    sp.add_argument("--max-universe", type=int, default=4)
    sp.set_defaults(func=cmd_gadget_verify)

    sp = with_words(with_output(sub.add_parser("protocol", help="tree to two-party protocol")))
    sp.add_argument("action", choices=("compile", "run"))
    sp.add_argument("--tree", required=True)
    sp.add_argument("--alice", type=_positions, default=frozenset(), help="1-based positions Alice holds")
    sp.add_argument("--first", choices=(ALICE, BOB), default=ALICE)
    sp.add_argument("--trace", action="store_true", help="include per-round transcript dumps")
    sp.set_defaults(func=cmd_protocol)

    sp = with_output(sub.add_parser("family", help="emit comp or one tables, trees or decoders"))
    sp.add_argument("family", choices=("comp", "one"))
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--t", type=int)
    sp.add_argument("--k", type=int)
    sp.add_argument("--emit", choices=("table", "tree", "decoder"), default="tree")
    sp.set_defaults(func=cmd_family)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        args.func(args)
    except _Negative:
        return NEGATIVE
    except ResourceError as exc:
        print(f"rankcot: {exc}", file=sys.stderr)
        return RESOURCE
    except (RankCotError, OSError, KeyError, ValueError) as exc:
        print(f"rankcot: {exc}", file=sys.stderr)
        return USAGE
    return OK


if __name__ == "__main__":
    sys.exit(main())
