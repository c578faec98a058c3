"""Single-layer unique-hard-attention decoders and the chain-of-thought loop.

A layer maps a token sequence ``s_1..s_m`` to one vector:

    scores_h[i] = <K_h s_i, Q_h s_m>
    head_h      = s at the leftmost maximal score
    multihead   = sum_h W_O[h] head_h          (W_O stored as H blocks of d x d)
    out         = W2 ReLU(W1 (multihead + s_m))

Two backends share this code path. ``"rational"`` keeps vectors as sparse
``{coordinate: Fraction}`` dicts and matrices column-sparse, so compiled
machines run exactly. ``"float"`` uses dense numpy arrays; scores within
``FLOAT_TIE_TOL`` of the maximum count as tied and the leftmost wins.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence, Union

import numpy as np

from .core import Domain, InvalidArgumentError, comp_domain
from .errors import AmbiguousOutputError

FLOAT_TIE_TOL = 1e-9
READ_TOL = 1e-6


# ---------------------------------------------------------------------------
# sparse exact linear algebra
# ---------------------------------------------------------------------------

SparseVec = dict  # coordinate -> Fraction, zeros omitted


class SparseMatrix:
    """A ``rows x cols`` matrix stored by columns, for sparse matrix-vector products."""

    __slots__ = ("shape", "cols")

    def __init__(self, shape: tuple[int, int], cols: Mapping[int, Mapping[int, Fraction]] | None = None):
        self.shape = (int(shape[0]), int(shape[1]))
        self.cols: dict[int, dict[int, Fraction]] = {}
        for c, col in (cols or {}).items():
            col = {int(r): Fraction(v) for r, v in col.items() if v != 0}
            if col:
                self.cols[int(c)] = col

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "SparseMatrix":
        return cls((rows, cols))

    @classmethod
    def identity(cls, d: int) -> "SparseMatrix":
        return cls((d, d), {i: {i: Fraction(1)} for i in range(d)})

    @classmethod
    def from_dense(cls, rows) -> "SparseMatrix":
        rows = [list(r) for r in rows]
        shape = (len(rows), len(rows[0]) if rows else 0)
        m = cls(shape)
        for r, row in enumerate(rows):
            for c, v in enumerate(row):
                v = Fraction(v)
                if v:
                    m.cols.setdefault(c, {})[r] = v
        return m

    def set(self, r: int, c: int, value) -> None:
        value = Fraction(value)
        col = self.cols.setdefault(c, {})
        if value:
            col[r] = value
        else:
            col.pop(r, None)

    def get(self, r: int, c: int) -> Fraction:
        return self.cols.get(c, {}).get(r, Fraction(0))

    def matvec(self, x: SparseVec) -> SparseVec:
        out: dict[int, Fraction] = {}
        for c, xc in x.items():
            col = self.cols.get(c)
            if col:
                for r, v in col.items():
                    out[r] = out.get(r, 0) + v * xc
        return {r: v for r, v in out.items() if v}

    def to_dense(self) -> list[list[Fraction]]:
        rows = [[Fraction(0)] * self.shape[1] for _ in range(self.shape[0])]
        for c, col in self.cols.items():
            for r, v in col.items():
                rows[r][c] = v
        return rows

    def to_numpy(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for c, col in self.cols.items():
            for r, v in col.items():
                out[r, c] = float(v)
        return out

    def __eq__(self, other):
        return isinstance(other, SparseMatrix) and self.shape == other.shape and self.cols == other.cols


def sparse_dot(x: SparseVec, y: SparseVec) -> Fraction:
    if len(x) > len(y):
        x, y = y, x
    return sum((v * y[k] for k, v in x.items() if k in y), Fraction(0))


def _sparse_add(x: SparseVec, y: SparseVec) -> SparseVec:
    out = dict(x)
    for k, v in y.items():
        out[k] = out.get(k, 0) + v
    return {k: v for k, v in out.items() if v}


def _sparse_relu(x: SparseVec) -> SparseVec:
    return {k: v for k, v in x.items() if v > 0}


def _to_sparse(vec) -> SparseVec:
    return {i: Fraction(v) for i, v in enumerate(vec) if Fraction(v) != 0}


def _to_dense(vec: SparseVec, d: int) -> list[Fraction]:
    out = [Fraction(0)] * d
    for k, v in vec.items():
        out[k] = v
    return out


# ---------------------------------------------------------------------------
# layer
# ---------------------------------------------------------------------------

Matrix = Union[np.ndarray, SparseMatrix]


@dataclass(frozen=True, eq=False)
class AttentionLayer:
    d: int
    H: int
    Q: tuple[Matrix, ...]
    K: tuple[Matrix, ...]
    W_O: tuple[Matrix, ...]  # H blocks of shape d x d; W_O = [W_O[0] | ... | W_O[H-1]]
    W1: Matrix
    W2: Matrix
    backend: str = "float"

    def __post_init__(self):
        if self.backend not in ("float", "rational"):
            raise InvalidArgumentError(f"unknown backend {self.backend!r}")
        if self.H < 1:
            raise InvalidArgumentError("H must be >= 1")
        conv = _as_sparse if self.backend == "rational" else _as_float
        for name in ("Q", "K", "W_O"):
            mats = tuple(conv(m) for m in getattr(self, name))
            if len(mats) != self.H:
                raise InvalidArgumentError(f"{name} needs {self.H} matrices, got {len(mats)}")
            object.__setattr__(self, name, mats)
        object.__setattr__(self, "W1", conv(self.W1))
        object.__setattr__(self, "W2", conv(self.W2))
        for m in (*self.Q, *self.K, *self.W_O, self.W1, self.W2):
            if tuple(m.shape) != (self.d, self.d):
                raise InvalidArgumentError(f"matrix shape {tuple(m.shape)} does not match d={self.d}")

    @property
    def W_O_full(self):
        """``W_O`` as one ``d x dH`` matrix."""
        if self.backend == "float":
            return np.hstack(self.W_O)
        full = SparseMatrix((self.d, self.d * self.H))
        for h, block in enumerate(self.W_O):
            for c, col in block.cols.items():
                full.cols[h * self.d + c] = dict(col)
        return full

    def to_backend(self, backend: str) -> "AttentionLayer":
        if backend == self.backend:
            return self
        return AttentionLayer(self.d, self.H, self.Q, self.K, self.W_O, self.W1, self.W2, backend)


def _as_float(m) -> np.ndarray:
    if isinstance(m, SparseMatrix):
        return m.to_numpy()
    return np.asarray(m, dtype=float)


def _as_sparse(m) -> SparseMatrix:
    if isinstance(m, SparseMatrix):
        return m
    if isinstance(m, np.ndarray):
        if m.dtype.kind == "f" and not np.all(np.isfinite(m)):
            raise InvalidArgumentError("non-finite weight in a rational machine")
        m = m.tolist()
    return SparseMatrix.from_dense(m)


def _vec(layer: AttentionLayer, v):
    if layer.backend == "rational":
        return v if isinstance(v, dict) else _to_sparse(v)
    if isinstance(v, dict):
        return np.asarray([float(x) for x in _to_dense(v, layer.d)])
    return np.asarray(v, dtype=float)


def _matvec(layer, m, v):
    return m.matvec(v) if layer.backend == "rational" else m @ v


def _dot(layer, x, y):
    return sparse_dot(x, y) if layer.backend == "rational" else float(x @ y)


def _check_dims(layer, seq):
    for v in seq:
        size = (max(v, default=-1) + 1) if isinstance(v, dict) else len(v)
        if size > layer.d or (not isinstance(v, dict) and len(v) != layer.d):
            raise InvalidArgumentError(f"vector of dimension {len(v)} fed to a d={layer.d} layer")


def attention_scores(layer: AttentionLayer, h: int, seq: Sequence, keys: Sequence | None = None) -> list:
    """``<K_h s_i, Q_h s_m>`` for every token; ``h`` is 0-based.

    ``keys`` optionally supplies precomputed ``K_h s_i`` vectors.
    """
    if not 0 <= h < layer.H:
        raise InvalidArgumentError(f"head {h} outside 0..{layer.H - 1}")
    if not seq:
        raise InvalidArgumentError("empty sequence")
    seq = [_vec(layer, v) for v in seq]
    _check_dims(layer, seq)
    q = _matvec(layer, layer.Q[h], seq[-1])
    if keys is None:
        keys = [_matvec(layer, layer.K[h], v) for v in seq]
    return [_dot(layer, k, q) for k in keys]


def leftmost_argmax(scores: Sequence, exact: bool = False) -> int:
    """Leftmost index whose score is maximal (within ``FLOAT_TIE_TOL`` for floats)."""
    best = max(scores)
    if exact or isinstance(best, Fraction) or isinstance(best, int):
        return next(i for i, s in enumerate(scores) if s == best)
    return next(i for i, s in enumerate(scores) if s >= best - FLOAT_TIE_TOL)


def _layer_core(layer, seq, keys_per_head, exact):
    heads, picks, all_scores = [], [], []
    q_src = seq[-1]
    for h in range(layer.H):
        q = _matvec(layer, layer.Q[h], q_src)
        scores = [_dot(layer, k, q) for k in keys_per_head[h]]
        i = leftmost_argmax(scores, exact)
        heads.append(seq[i])
        picks.append(i)
        all_scores.append(scores)
    return layer_output_from_heads(layer, heads, q_src), picks, all_scores


def layer_output_from_heads(layer: AttentionLayer, heads: Sequence, last):
    """``W2 ReLU(W1 (W_O concat(heads) + last))`` once the head vectors are known."""
    if layer.backend == "rational":
        multi: SparseVec = {}
        for h, head in enumerate(heads):
            multi = _sparse_add(multi, layer.W_O[h].matvec(head))
        hidden = _sparse_relu(layer.W1.matvec(_sparse_add(multi, last)))
        return layer.W2.matvec(hidden)
    multi = sum(layer.W_O[h] @ head for h, head in enumerate(heads))
    return layer.W2 @ np.maximum(layer.W1 @ (multi + last), 0.0)


def layer_apply(layer: AttentionLayer, seq: Sequence, exact: bool = False):
    """Apply the layer to a non-empty token sequence and return the new vector."""
    if not seq:
        raise InvalidArgumentError("empty sequence")
    seq = [_vec(layer, v) for v in seq]
    _check_dims(layer, seq)
    keys = [[_matvec(layer, layer.K[h], v) for v in seq] for h in range(layer.H)]
    return _layer_core(layer, seq, keys, exact)[0]


# ---------------------------------------------------------------------------
# output maps and machines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OutputMap:
    """``"argmax"``: argmax over ``coords`` then ``labels``; ``"read"``: round ``coord`` minus ``base``."""

    kind: str
    coords: tuple[int, ...] = ()
    labels: tuple[int, ...] = ()
    coord: int = 0
    base: int = 0
    tolerance: float = READ_TOL

    def __post_init__(self):
        if self.kind not in ("argmax", "read"):
            raise InvalidArgumentError(f"unknown output map kind {self.kind!r}")
        if self.kind == "argmax" and (not self.coords or len(self.coords) != len(self.labels)):
            raise InvalidArgumentError("argmax output map needs matching coords and labels")

    @classmethod
    def argmax(cls, coords: Sequence[int], labels: Sequence[int]) -> "OutputMap":
        return cls("argmax", tuple(int(c) for c in coords), tuple(int(x) for x in labels))

    @classmethod
    def read(cls, coord: int, base: int = 0, tolerance: float = READ_TOL) -> "OutputMap":
        return cls("read", coord=int(coord), base=int(base), tolerance=tolerance)

    def apply(self, y, out_size: int) -> int:
        get = (lambda c: y.get(c, Fraction(0))) if isinstance(y, dict) else (lambda c: y[c])
        if self.kind == "read":
            value = get(self.coord)
            nearest = round(value)
            if abs(value - nearest) > self.tolerance:
                raise AmbiguousOutputError(f"coordinate {self.coord} holds {float(value)}, not an integer")
            letter = int(nearest) - self.base
        else:
            vals = [get(c) for c in self.coords]
            best = max(vals)
            exact = isinstance(best, (Fraction, int))
            tied = [i for i, v in enumerate(vals) if (v == best if exact else v >= best - FLOAT_TIE_TOL)]
            if len(tied) > 1:
                raise AmbiguousOutputError(f"output argmax tied between coordinates {[self.coords[i] for i in tied]}")
            letter = self.labels[tied[0]]
        if not 0 <= letter < out_size:
            raise AmbiguousOutputError(f"output letter {letter} outside the output alphabet")
        return letter

    def to_json(self) -> dict:
        if self.kind == "read":
            return {"kind": "read", "coord": self.coord, "base": self.base, "tolerance": self.tolerance}
        return {"kind": "argmax", "coords": list(self.coords), "labels": list(self.labels)}

    @classmethod
    def from_json(cls, data: dict) -> "OutputMap":
        if data["kind"] == "read":
            return cls.read(data["coord"], data.get("base", 0), data.get("tolerance", READ_TOL))
        return cls.argmax(data["coords"], data["labels"])


@dataclass(frozen=True)
class DecoderTrace:
    tokens: tuple  # x_1..x_n, y_0, y_1, ..., y_t
    n: int
    heads: tuple[tuple[int, ...], ...]  # per iteration, 0-based token index chosen by each head
    scores: tuple[tuple[tuple, ...], ...]  # per iteration, per head, the score list

    @property
    def ys(self) -> tuple:
        return self.tokens[self.n:]

    @property
    def final(self):
        return self.tokens[-1]


@dataclass(frozen=True, eq=False)
class DecoderMachine:
    domain: Domain
    layer: AttentionLayer
    encoding: tuple  # one vector per canonical assignment index
    eol: object
    output_map: OutputMap
    iterations: int

    def __post_init__(self):
        if len(self.encoding) != self.domain.num_assignments:
            raise InvalidArgumentError("encoding must cover every assignment")
        if self.iterations < 1:
            raise InvalidArgumentError("a machine needs at least one iteration")
        enc = tuple(_vec(self.layer, v) for v in self.encoding)
        eol = _vec(self.layer, self.eol)
        _check_dims(self.layer, list(enc) + [eol])
        object.__setattr__(self, "encoding", enc)
        object.__setattr__(self, "eol", eol)
        keys = tuple(tuple(_matvec(self.layer, self.layer.K[h], v) for v in enc) for h in range(self.layer.H))
        object.__setattr__(self, "_assignment_keys", keys)

    @property
    def backend(self) -> str:
        return self.layer.backend

    @property
    def d(self) -> int:
        return self.layer.d

    @property
    def H(self) -> int:
        return self.layer.H

    def assignment_keys(self, h: int) -> tuple:
        """Cached ``K_h p(a)`` for every assignment."""
        return self._assignment_keys[h]

    def to_backend(self, backend: str) -> "DecoderMachine":
        if backend == self.backend:
            return self
        layer = self.layer.to_backend(backend)
        conv = (lambda v: _to_dense(v, self.d)) if self.backend == "rational" else (lambda v: list(v))
        return DecoderMachine(
            self.domain, layer, tuple(conv(v) for v in self.encoding), conv(self.eol), self.output_map, self.iterations
        )

    # -- serialisation -----------------------------------------------------
    def to_json(self) -> dict:
        rational = self.backend == "rational"

        def mat(m):
            if rational:
                return [[str(v) for v in row] for row in m.to_dense()]
            return [[float(v) for v in row] for row in m]

        def vec(v):
            return [str(x) for x in _to_dense(v, self.d)] if rational else [float(x) for x in v]

        lay = self.layer
        return {
            "format": "rankcot-decoder",
            "backend": self.backend,
            "d": self.d,
            "H": self.H,
            "sigma_sizes": list(self.domain.sigma_sizes),
            "out_size": self.domain.out_size,
            "iterations": self.iterations,
            "Q": [mat(m) for m in lay.Q],
            "K": [mat(m) for m in lay.K],
            "W_O": [mat(m) for m in lay.W_O],
            "W1": mat(lay.W1),
            "W2": mat(lay.W2),
            "encoding": {**{str(a): vec(v) for a, v in enumerate(self.encoding)}, "eol": vec(self.eol)},
            "output_map": self.output_map.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "DecoderMachine":
        if isinstance(data, str):
            data = json.loads(data)
        backend = data["backend"]
        domain = Domain(tuple(data["sigma_sizes"]), int(data["out_size"]))
        if backend == "rational":
            mat = lambda rows: SparseMatrix.from_dense([[Fraction(x) for x in r] for r in rows])  # noqa: E731
            vec = lambda v: [Fraction(x) for x in v]  # noqa: E731
        else:
            mat = lambda rows: np.asarray(rows, dtype=float)  # noqa: E731
            vec = lambda v: [float(x) for x in v]  # noqa: E731
        layer = AttentionLayer(
            int(data["d"]),
            int(data["H"]),
            tuple(mat(m) for m in data["Q"]),
            tuple(mat(m) for m in data["K"]),
            tuple(mat(m) for m in data["W_O"]),
            mat(data["W1"]),
            mat(data["W2"]),
            backend,
        )
        enc = data["encoding"]
        encoding = tuple(vec(enc[str(a)]) for a in range(domain.num_assignments))
        return cls(domain, layer, encoding, vec(enc["eol"]), OutputMap.from_json(data["output_map"]),
                   int(data["iterations"]))


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

def decoder_run(machine: DecoderMachine, w: Sequence[int], t: int | None = None, exact: bool = False) -> DecoderTrace:
    """Run ``t`` chain-of-thought iterations (default: the machine's own count)."""
    t = machine.iterations if t is None else t
    if t < 1:
        raise InvalidArgumentError("t must be >= 1")
    domain = machine.domain
    word = domain.check_word(w)
    layer = machine.layer
    idx = [domain.offsets[i] + x for i, x in enumerate(word)]
    seq = [machine.encoding[a] for a in idx] + [machine.eol]
    keys = [[machine.assignment_keys(h)[a] for a in idx] + [_matvec(layer, layer.K[h], machine.eol)]
            for h in range(layer.H)]
    heads, scores = [], []
    for _ in range(t):
        y, picks, sc = _layer_core(layer, seq, keys, exact)
        heads.append(tuple(picks))
        scores.append(tuple(tuple(s) for s in sc))
        seq.append(y)
        for h in range(layer.H):
            keys[h].append(_matvec(layer, layer.K[h], y))
    return DecoderTrace(tuple(seq), domain.n, tuple(heads), tuple(scores))


def decoder_compute(machine: DecoderMachine, w: Sequence[int], exact: bool = False) -> int:
    trace = decoder_run(machine, w, machine.iterations, exact)
    return machine.output_map.apply(trace.final, machine.domain.out_size)


def decoder_run_batch(machine: DecoderMachine, words: np.ndarray, t: int | None = None) -> np.ndarray:
    """Vectorised float run over many words; returns ``y_1..y_t`` as a ``(B, t, d)`` array."""
    t = machine.iterations if t is None else t
    m = machine if machine.backend == "float" else machine.to_backend("float")
    layer = m.layer
    words = np.asarray(words, dtype=np.int64)
    idx = m.domain.word_assignments(words)
    enc = np.stack(m.encoding)
    B = len(words)
    tokens = np.concatenate([enc[idx], np.broadcast_to(m.eol, (B, 1, m.d))], axis=1)
    ys = []
    rows = np.arange(B)
    for _ in range(t):
        last = tokens[:, -1, :]
        multi = np.zeros((B, m.d))
        for h in range(layer.H):
            keys = tokens @ layer.K[h].T  # (B, L, d)
            q = last @ layer.Q[h].T  # (B, d)
            scores = np.einsum("bld,bd->bl", keys, q)
            best = scores.max(axis=1, keepdims=True)
            pick = np.argmax(scores >= best - FLOAT_TIE_TOL, axis=1)
            multi += tokens[rows, pick] @ layer.W_O[h].T
        y = np.maximum((multi + last) @ layer.W1.T, 0.0) @ layer.W2.T
        ys.append(y)
        tokens = np.concatenate([tokens, y[:, None, :]], axis=1)
    return np.stack(ys, axis=1)


def read_outputs(machine: DecoderMachine, ys: np.ndarray) -> np.ndarray:
    """Apply a ``read`` output map to a batch of final vectors; raises on non-integers."""
    om = machine.output_map
    if om.kind != "read":
        return np.array([om.apply(y, machine.domain.out_size) for y in ys])
    vals = ys[..., om.coord]
    nearest = np.rint(vals)
    if np.any(np.abs(vals - nearest) > om.tolerance):
        raise AmbiguousOutputError("a read coordinate is not within tolerance of an integer")
    return nearest.astype(np.int64) - om.base


# ---------------------------------------------------------------------------
# the dimension-6 machine for iterated composition
# ---------------------------------------------------------------------------

def build_comp_decoder(n: int, t: int) -> DecoderMachine:
    """Six-dimensional one-head machine computing ``comp^t_n`` in ``t`` iterations.

    Token for position ``i`` holding value ``v``: ``(0, cos i, sin i, cos v, sin v, v)``;
    ``eol = (0, 0, 0, cos 1, sin 1, 1)``. Keys read coordinates 2-3 of a token and
    the query reads coordinates 4-5 of the last vector, so the score of position
    ``i`` is ``cos(i - current)``, maximal exactly at the current pointer.
    """
    if n < 1 or t < 1:
        raise InvalidArgumentError("need n >= 1 and t >= 1")
    domain = comp_domain(n)
    d = 6
    K = np.zeros((d, d))
    K[0, 1] = K[1, 2] = 1.0
    Q = np.zeros((d, d))
    Q[0, 3] = Q[1, 4] = 1.0
    W_O = np.zeros((d, d))
    W_O[0, 3] = W_O[1, 4] = W_O[2, 5] = 1.0
    W1 = np.zeros((d, d))
    W1[0, 0] = W1[0, 2] = 1.0
    W1[1, 1] = W1[1, 2] = 1.0
    W1[2, 2] = 1.0
    W2 = np.zeros((d, d))
    W2[3, 0], W2[3, 2] = 1.0, -1.0
    W2[4, 1], W2[4, 2] = 1.0, -1.0
    W2[5, 2] = 1.0
    layer = AttentionLayer(d, 1, (Q,), (K,), (W_O,), W1, W2, "float")
    encoding = []
    for i in range(1, n + 1):
        for code in range(n):
            v = code + 1
            encoding.append([0.0, math.cos(i), math.sin(i), math.cos(v), math.sin(v), float(v)])
    eol = [0.0, 0.0, 0.0, math.cos(1), math.sin(1), 1.0]
    return DecoderMachine(domain, layer, tuple(encoding), eol, OutputMap.read(5, base=1), t)
