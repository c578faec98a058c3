"""Rank of decision trees over assignment queries and its links to hard-attention decoders.

Submodules: ``core`` (domains, tables, families), ``trees``, ``rank``,
``decoder``, ``compiler``, ``learning``, ``hardness``, ``commcomp``, ``cli``.
"""
from .commcomp import PositionSplit, Protocol, Transcript, embed_pointer_chasing, one_k_two_round, run_protocol, tree_to_protocol
from .compiler import compile_tree, extract_tree, pad_tree
from .core import (
    Assignment,
    Domain,
    FunctionTable,
    RestrictionState,
    build_comp_table,
    build_one_table,
    comp_eval,
    one_eval,
)
from .decoder import AttentionLayer, DecoderMachine, OutputMap, build_comp_decoder, decoder_compute, decoder_run
from .errors import (
    AmbiguousOutputError,
    InvalidArgumentError,
    MalformedTreeError,
    ProtocolFault,
    RankCotError,
    ResourceError,
    UnsupportedDomainError,
)
from .hardness import NAEFormula, SetFamilyInstance, reduce_2order_to_sample, reduce_nae_to_2order
from .learning import Sample, SampleSource, pac_learn, solve_consistency
from .rank import common_top_element, mh_rank_bruteforce, rank_exact_minimax, rank_exact_yesdepth
from .trees import AQuery, DecisionTree, HQuery, Leaf, Node, comp_tree, one_tree, tree_eval

__version__ = "0.1.0"
