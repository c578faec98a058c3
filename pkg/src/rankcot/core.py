"""Domains, words, assignments, explicit function tables and the built-in families.

Conventions used everywhere in the package:

* positions are 1-based (``1..n``), as in the usual notation ``(i, sigma)``;
* letters are 0-based integer codes ``0..|Sigma_i|-1``. For binary domains the
  code *is* the bit. For ``comp`` the code ``j`` stands for the value ``j+1``,
  for ``one`` the output code ``j`` stands for the position ``j+1``;
* assignments are enumerated position-major, letter-minor. The canonical
  index of ``(i, sigma)`` is ``offset[i] + sigma``;
* words are indexed in mixed radix, most significant position first.
"""
from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import InvalidArgumentError, ResourceError

DEFAULT_TABLE_BUDGET = 2**20
DEFAULT_SEARCH_BUDGET = 5_000_000


def _env_budget(default):
    raw = os.environ.get("RANKCOT_BUDGET")
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise InvalidArgumentError(f"RANKCOT_BUDGET must be an integer, got {raw!r}")
    if value <= 0:
        raise InvalidArgumentError("RANKCOT_BUDGET must be positive")
    return value


def table_budget() -> int:
    """Maximum number of entries in a dense table (env ``RANKCOT_BUDGET`` overrides)."""
    return _env_budget(DEFAULT_TABLE_BUDGET)


def search_budget() -> int:
    """Default work budget for exhaustive searches (env ``RANKCOT_BUDGET`` overrides)."""
    return _env_budget(DEFAULT_SEARCH_BUDGET)


class Assignment(NamedTuple):
    """The claim "position ``position`` (1-based) holds letter ``letter``"."""

    position: int
    letter: int

    def __str__(self):
        return f"({self.position},{self.letter})"


@dataclass(frozen=True)
class Domain:
    sigma_sizes: tuple[int, ...]
    out_size: int = 2

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sigma_sizes)
        object.__setattr__(self, "sigma_sizes", sizes)
        if not sizes:
            raise InvalidArgumentError("a domain needs at least one position")
        if any(s < 1 for s in sizes):
            raise InvalidArgumentError(f"alphabet sizes must be >= 1: {sizes}")
        if self.out_size < 1:
            raise InvalidArgumentError("output alphabet must be non-empty")

    @classmethod
    def binary(cls, n: int, out_size: int = 2) -> "Domain":
        return cls((2,) * n, out_size)

    @property
    def n(self) -> int:
        return len(self.sigma_sizes)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        return tuple(int(x) for x in np.concatenate(([0], np.cumsum(self.sigma_sizes)[:-1])))

    @property
    def num_assignments(self) -> int:
        return sum(self.sigma_sizes)

    @property
    def num_words(self) -> int:
        return int(np.prod(self.sigma_sizes, dtype=object))

    @property
    def is_binary(self) -> bool:
        return all(s == 2 for s in self.sigma_sizes)

    # -- assignments -------------------------------------------------------
    def assignment_index(self, position: int, letter: int) -> int:
        if not 1 <= position <= self.n:
            raise InvalidArgumentError(f"position {position} outside 1..{self.n}")
        if not 0 <= letter < self.sigma_sizes[position - 1]:
            raise InvalidArgumentError(f"letter {letter} out of range at position {position}")
        return self.offsets[position - 1] + letter

    def assignment(self, index: int) -> Assignment:
        if not 0 <= index < self.num_assignments:
            raise InvalidArgumentError(f"assignment index {index} out of range")
        pos = int(np.searchsorted(self.offsets, index, side="right"))
        return Assignment(pos, index - self.offsets[pos - 1])

    @cached_property
    def assignment_positions(self) -> np.ndarray:
        """0-based position of every canonical assignment index."""
        return np.repeat(np.arange(self.n), self.sigma_sizes)

    @cached_property
    def assignment_letters(self) -> np.ndarray:
        return np.concatenate([np.arange(s) for s in self.sigma_sizes])

    def assignments(self) -> list[Assignment]:
        return [Assignment(i + 1, s) for i, size in enumerate(self.sigma_sizes) for s in range(size)]

    # -- words -------------------------------------------------------------
    def check_word(self, word: Sequence[int]) -> tuple[int, ...]:
        word = tuple(int(x) for x in word)
        if len(word) != self.n:
            raise InvalidArgumentError(f"word has length {len(word)}, domain has n={self.n}")
        for i, (x, s) in enumerate(zip(word, self.sigma_sizes)):
            if not 0 <= x < s:
                raise InvalidArgumentError(f"letter {x} out of range at position {i + 1}")
        return word

    def encode(self, word: Sequence[int]) -> int:
        index = 0
        for x, s in zip(self.check_word(word), self.sigma_sizes):
            index = index * s + x
        return index

    def decode(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.num_words:
            raise InvalidArgumentError(f"word index {index} out of range")
        letters = []
        for s in reversed(self.sigma_sizes):
            index, x = divmod(index, s)
            letters.append(x)
        return tuple(reversed(letters))

    def require_table(self, budget: int | None = None) -> int:
        budget = table_budget() if budget is None else budget
        size = self.num_words
        if size > budget:
            raise ResourceError(
                f"dense table needs {size} entries, budget is {budget}", required=size, budget=budget
            )
        return size

    def words(self, budget: int | None = None) -> np.ndarray:
        """All words as an ``(N, n)`` integer array in mixed-radix order."""
        self.require_table(budget)
        grids = np.indices(self.sigma_sizes).reshape(self.n, -1).T
        return np.ascontiguousarray(grids, dtype=np.int64)

    def word_assignments(self, words: np.ndarray) -> np.ndarray:
        """Canonical indices of the ``n`` assignments consistent with each word."""
        return np.asarray(words, dtype=np.int64) + np.asarray(self.offsets, dtype=np.int64)

    def to_json(self) -> dict:
        return {"sigma_sizes": list(self.sigma_sizes), "out_size": self.out_size}


def consistent(domain: Domain, a: Assignment, word: Sequence[int]) -> bool:
    """True iff ``word`` holds ``a.letter`` at ``a.position``."""
    word = domain.check_word(word)
    domain.assignment_index(*a)
    return word[a.position - 1] == a.letter


@dataclass(frozen=True, eq=False)
class FunctionTable:
    """A function ``Sigma_1 x ... x Sigma_n -> O`` stored densely."""

    domain: Domain
    outputs: np.ndarray

    def __post_init__(self):
        out = np.asarray(self.outputs, dtype=np.int64).copy()
        if out.shape != (self.domain.num_words,):
            raise InvalidArgumentError(
                f"table has {out.size} entries, domain has {self.domain.num_words} words"
            )
        if out.size and (out.min() < 0 or out.max() >= self.domain.out_size):
            raise InvalidArgumentError("table output outside the output alphabet")
        out.setflags(write=False)
        object.__setattr__(self, "outputs", out)

    @classmethod
    def from_function(cls, domain: Domain, fn: Callable[[tuple[int, ...]], int]) -> "FunctionTable":
        domain.require_table()
        it = itertools.product(*(range(s) for s in domain.sigma_sizes))
        return cls(domain, np.fromiter((fn(w) for w in it), dtype=np.int64, count=domain.num_words))

    def __call__(self, word: Sequence[int]) -> int:
        return int(self.outputs[self.domain.encode(word)])

    def __eq__(self, other):
        if not isinstance(other, FunctionTable):
            return NotImplemented
        return self.domain == other.domain and np.array_equal(self.outputs, other.outputs)

    __hash__ = None

    def is_constant(self) -> bool:
        return bool(np.all(self.outputs == self.outputs[0]))

    def to_json(self) -> dict:
        return {
            "sigma_sizes": list(self.domain.sigma_sizes),
            "out_size": self.domain.out_size,
            "outputs": [int(x) for x in self.outputs],
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "FunctionTable":
        if isinstance(data, str):
            data = json.loads(data)
        try:
            domain = Domain(tuple(data["sigma_sizes"]), int(data["out_size"]))
            return cls(domain, np.asarray(data["outputs"], dtype=np.int64))
        except KeyError as exc:
            raise InvalidArgumentError(f"function table JSON lacks {exc}") from None


# -- built-in families ------------------------------------------------------

def comp_trace(n: int, t: int, w: Sequence[int]) -> list[int]:
    """``[f^(0)(1), f^(1)(1), ..., f^(t)(1)]`` for ``f(i) = w_i`` (values 1-based)."""
    if n < 1 or t < 0:
        raise InvalidArgumentError("comp needs n >= 1 and t >= 0")
    w = [int(x) for x in w]
    if len(w) != n or any(not 1 <= x <= n for x in w):
        raise InvalidArgumentError(f"comp input must be a length-{n} word over 1..{n}")
    trace = [1]
    for _ in range(t):
        trace.append(w[trace[-1] - 1])
    return trace


def comp_eval(n: int, t: int, w: Sequence[int]) -> int:
    """``f^(t)(1)`` where the word lists ``f(1), ..., f(n)``; ``t = 0`` gives 1."""
    return comp_trace(n, t, w)[-1]


def one_eval(n: int, k: int, w: Sequence[int]) -> int:
    """Position of the ``k``-th one in a binary word, or ``n + 1`` if there are fewer."""
    if k < 1:
        raise InvalidArgumentError("k must be >= 1")
    w = [int(x) for x in w]
    if len(w) != n or any(x not in (0, 1) for x in w):
        raise InvalidArgumentError(f"one_k input must be a binary word of length {n}")
    seen = 0
    for i, bit in enumerate(w, start=1):
        seen += bit
        if seen == k:
            return i
    return n + 1


def comp_domain(n: int) -> Domain:
    return Domain((n,) * n, n)


def one_domain(n: int) -> Domain:
    return Domain((2,) * n, n + 1)


def build_comp_table(n: int, t: int, budget: int | None = None) -> FunctionTable:
    """Dense table of ``comp^t_n``; letter codes are values minus one."""
    domain = comp_domain(n)
    domain.require_table(budget)
    words = domain.words(budget)
    cur = np.zeros(len(words), dtype=np.int64)  # 0-based f^(0)(1)
    rows = np.arange(len(words))
    for _ in range(t):
        cur = words[rows, cur]
    return FunctionTable(domain, cur)


def build_one_table(n: int, k: int, budget: int | None = None) -> FunctionTable:
    """Dense table of ``one^k_n``; output code ``j`` means position ``j + 1``."""
    if k < 1:
        raise InvalidArgumentError("k must be >= 1")
    domain = one_domain(n)
    domain.require_table(budget)
    words = domain.words(budget)
    csum = np.cumsum(words, axis=1)
    hit = csum == k
    first = np.where(hit.any(axis=1), hit.argmax(axis=1), n)
    return FunctionTable(domain, first)


def all_words(domain: Domain) -> Iterable[tuple[int, ...]]:
    return itertools.product(*(range(s) for s in domain.sigma_sizes))


@dataclass(frozen=True)
class RestrictionState:
    """A product of non-empty allowed-letter sets, one bitmask per position.

    Every set of words that YES/NO assignment questions can carve out of the
    full domain has this shape, which makes it a compact memo key.
    """

    allowed: tuple[int, ...]

    @classmethod
    def full(cls, domain: Domain) -> "RestrictionState":
        return cls(tuple((1 << s) - 1 for s in domain.sigma_sizes))

    def allows(self, position0: int, letter: int) -> bool:
        return bool(self.allowed[position0] >> letter & 1)

    def forced(self, position0: int, letter: int) -> bool:
        """True when the position can only hold ``letter``."""
        return self.allowed[position0] == 1 << letter

    def assume(self, position0: int, letter: int) -> "RestrictionState":
        allowed = list(self.allowed)
        allowed[position0] &= 1 << letter
        return RestrictionState(tuple(allowed))

    def exclude(self, position0: int, letter: int) -> "RestrictionState":
        allowed = list(self.allowed)
        allowed[position0] &= ~(1 << letter)
        return RestrictionState(tuple(allowed))

    def is_empty(self) -> bool:
        return any(m == 0 for m in self.allowed)

    def contains(self, word: Sequence[int]) -> bool:
        return all(m >> x & 1 for m, x in zip(self.allowed, word))

    def size(self) -> int:
        out = 1
        for m in self.allowed:
            out *= bin(m).count("1")
        return out
