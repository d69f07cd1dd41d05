"""Vocabulary-indexed embedding matrix: loading, saving, queries.

On-disk format is word2vec text: an optional header line ``"<V> <D>"``
followed by one line per word, ``"<token> <f1> ... <fD>"``, single-space
separated. Floats are written with 17 significant digits so that a
save/load round trip reproduces the matrix bit for bit.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError

FORMATS = ("word2vec", "headerless")

# Row norms this close to 1 count as unit length (store invariant).
UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class EmbeddingStore:
    """Immutable |V| x d matrix of finite float64 embeddings plus vocab.

    ``normalized`` asserts that every row has unit Euclidean norm within
    1e-9; it is set by :func:`normalize_all` or verified on construction.
    """

    vocab: tuple[str, ...]
    matrix: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.float64, copy=True, order="C")
        if matrix.ndim != 2:
            raise DataError("bad-matrix-shape", f"matrix must be 2-D, got shape {matrix.shape}")
        if len(self.vocab) != matrix.shape[0]:
            raise DataError(
                "vocab-matrix-mismatch",
                f"{len(self.vocab)} tokens but {matrix.shape[0]} matrix rows",
            )
        if not np.isfinite(matrix).all():
            bad = int(np.argwhere(~np.isfinite(matrix).all(axis=1))[0][0])
            raise DataError("non-finite-value", f"non-finite embedding for token {self.vocab[bad]!r}")
        index = {}
        for i, token in enumerate(self.vocab):
            if token in index:
                raise DataError("duplicate-token", f"duplicate token {token!r}")
            index[token] = i
        if self.normalized:
            norms = np.linalg.norm(matrix, axis=1)
            if np.abs(norms - 1.0).max(initial=0.0) > UNIT_NORM_TOL:
                bad = int(np.argmax(np.abs(norms - 1.0)))
                raise DataError(
                    "not-normalized",
                    f"normalized store has non-unit row for {self.vocab[bad]!r} (norm {norms[bad]!r})",
                )
        matrix.setflags(write=False)
        object.__setattr__(self, "vocab", tuple(self.vocab))
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "_index", index)

    @property
    def index(self) -> dict[str, int]:
        return self._index

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def row(self, token: str) -> np.ndarray:
        try:
            return self.matrix[self._index[token]]
        except KeyError:
            raise DataError("unknown-token", f"token {token!r} not in vocabulary") from None

    def word_vector(self, token: str) -> "WordVector":
        return WordVector(token, self.row(token))

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        return (
            self.vocab == other.vocab
            and self.normalized == other.normalized
            and self.matrix.shape == other.matrix.shape
            and self.matrix.tobytes() == other.matrix.tobytes()
        )


@dataclass(frozen=True)
class WordVector:
    word: str
    vector: np.ndarray


def _parse_lines(lines: list[str], dim: int, first_line_no: int) -> tuple[list[str], np.ndarray]:
    vocab: list[str] = []
    rows = np.empty((len(lines), dim), dtype=np.float64)
    seen: set[str] = set()
    for offset, line in enumerate(lines):
        line_no = first_line_no + offset
        fields = line.split(" ")
        if len(fields) != dim + 1:
            raise DataError(
                "dimension-mismatch",
                f"line {line_no}: expected {dim} values, got {len(fields) - 1}",
            )
        token = fields[0]
        if token in seen:
            raise DataError("duplicate-token", f"line {line_no}: duplicate token {token!r}")
        seen.add(token)
        try:
            values = [float(v) for v in fields[1:]]
        except ValueError as exc:
            raise DataError("invalid-value", f"line {line_no}: {exc}") from None
        if not all(math.isfinite(v) for v in values):
            raise DataError("non-finite-value", f"line {line_no}: non-finite value for {token!r}")
        vocab.append(token)
        rows[offset] = values
    return vocab, rows


def load_text(path: str | os.PathLike, format: str = "word2vec") -> EmbeddingStore:
    """Load a text embedding file verbatim (no normalization applied).

    ``format="word2vec"`` expects the ``"<V> <D>"`` header; ``"headerless"``
    infers the dimension from the first data line. The ``normalized`` flag of
    the result is set only if every stored row already has unit norm.
    """
    if format not in FORMATS:
        raise DataError("unknown-format", f"unknown embedding format {format!r}")
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataError("empty-file", f"{path}: no content")

    if format == "word2vec":
        header = lines[0].split(" ")
        if len(header) != 2:
            raise DataError("bad-header", f"line 1: expected '<V> <D>', got {lines[0]!r}")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise DataError("bad-header", f"line 1: expected integers, got {lines[0]!r}") from None
        if count < 1 or dim < 1:
            raise DataError("bad-header", f"line 1: V and D must be positive, got {lines[0]!r}")
        body = lines[1:]
        if len(body) > count:
            raise DataError(
                "line-count-mismatch",
                f"header declares {count} words but line {count + 2} holds extra data",
            )
        if len(body) < count:
            raise DataError(
                "line-count-mismatch",
                f"header declares {count} words but file ends after {len(body)} data lines",
            )
        vocab, rows = _parse_lines(body, dim, first_line_no=2)
    else:
        dim = len(lines[0].split(" ")) - 1
        if dim < 1:
            raise DataError("dimension-mismatch", "line 1: no embedding values found")
        vocab, rows = _parse_lines(lines, dim, first_line_no=1)

    norms = np.linalg.norm(rows, axis=1)
    is_unit = bool(np.abs(norms - 1.0).max(initial=0.0) <= UNIT_NORM_TOL)
    return EmbeddingStore(tuple(vocab), rows, normalized=is_unit)


def save_text(store: EmbeddingStore, path: str | os.PathLike, format: str = "word2vec") -> None:
    """Write the store in word2vec text format (17 significant digits)."""
    if format not in FORMATS:
        raise DataError("unknown-format", f"unknown embedding format {format!r}")
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        if format == "word2vec":
            fh.write(f"{len(store.vocab)} {store.dim}\n")
        for token, row in zip(store.vocab, store.matrix):
            fh.write(token)
            for v in row:
                fh.write(f" {v:.17g}")
            fh.write("\n")
    os.replace(tmp, path)


def normalize_all(store: EmbeddingStore) -> EmbeddingStore:
    """Return a copy with every row scaled to unit Euclidean norm."""
    norms = np.linalg.norm(store.matrix, axis=1)
    if (norms == 0.0).any():
        bad = int(np.argmax(norms == 0.0))
        raise DataError("zero-norm-row", f"cannot normalize zero vector for {store.vocab[bad]!r}")
    return EmbeddingStore(store.vocab, store.matrix / norms[:, None], normalized=True)


def nearest_neighbors(
    store: EmbeddingStore,
    query: WordVector | np.ndarray,
    m: int,
    exclude: set[str] | frozenset[str] = frozenset(),
) -> list[tuple[str, float]]:
    """Top-m vocabulary tokens by cosine similarity to the query vector.

    Excluded tokens and zero-norm rows are omitted. Ties are broken by
    ascending lexicographic token order, so results are deterministic.
    """
    if m < 1:
        raise DataError("bad-count", f"m must be >= 1, got {m}")
    vector = query.vector if isinstance(query, WordVector) else np.asarray(query, dtype=np.float64)
    if vector.shape != (store.dim,):
        raise DataError("dimension-mismatch", f"query has shape {vector.shape}, store dim {store.dim}")
    qnorm = np.linalg.norm(vector)
    if qnorm == 0.0:
        raise DataError("zero-query", "cosine similarity undefined for zero query vector")
    norms = np.linalg.norm(store.matrix, axis=1)
    keep = norms > 0.0
    if exclude:
        for token in exclude:
            i = store.index.get(token)
            if i is not None:
                keep[i] = False
    idx = np.nonzero(keep)[0]
    sims = (store.matrix[idx] @ vector) / (norms[idx] * qnorm)
    tokens = np.array(store.vocab, dtype=object)[idx]
    order = np.lexsort((tokens, -sims))[:m]
    return [(str(tokens[i]), float(sims[i])) for i in order]
