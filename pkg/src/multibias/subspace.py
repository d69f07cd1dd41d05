"""Bias-subspace identification.

The subspace is the span of the top principal directions of the stacked
per-set deviation rows ``w - mean(D_i)``. Each defining set is centered on
its own mean and no global re-centering is applied afterwards, so sets of
different sizes contribute exactly their own deviations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .lexicon import ResolvedSet
from .store import EmbeddingStore

# Relative singular-value cutoff for rank decisions (matrix_rank convention).
_RANK_RTOL_FACTOR = np.finfo(np.float64).eps


@dataclass(frozen=True, eq=False)
class BiasSubspace:
    """Orthonormal basis (k x d, rows are directions) with PCA spectrum.

    ``eigenvalues`` are population-covariance eigenvalues of the deviation
    rows, descending. ``explained_variance_ratio`` is each eigenvalue over
    the total across all components, so the retained ratios sum to <= 1.
    """

    basis: np.ndarray
    eigenvalues: np.ndarray
    explained_variance_ratio: np.ndarray
    source: dict

    def __post_init__(self):
        basis = np.array(self.basis, dtype=np.float64, copy=True)
        basis.setflags(write=False)
        gram = basis @ basis.T
        if np.abs(gram - np.eye(basis.shape[0])).max(initial=0.0) > 1e-10:
            raise DataError("basis-not-orthonormal", "subspace basis failed orthonormality check")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "eigenvalues", np.asarray(self.eigenvalues, dtype=np.float64))
        object.__setattr__(
            self, "explained_variance_ratio", np.asarray(self.explained_variance_ratio, dtype=np.float64)
        )

    @property
    def k(self) -> int:
        return int(self.basis.shape[0])

    @property
    def dim(self) -> int:
        return int(self.basis.shape[1])


def deviation_matrix(sets: tuple[ResolvedSet, ...], store: EmbeddingStore) -> np.ndarray:
    """Stack ``w - mean(set)`` rows, set by set, preserving word order."""
    if not sets:
        raise DataError("empty-set", "no defining sets given")
    blocks = []
    for rset in sets:
        rows = store.matrix[list(rset.indices)]
        blocks.append(rows - rows.mean(axis=0))
    return np.vstack(blocks)


def _apply_sign_convention(basis: np.ndarray) -> np.ndarray:
    # Flip each direction so its largest-magnitude coordinate is positive;
    # argmax takes the first coordinate on ties.
    flipped = basis.copy()
    for i in range(flipped.shape[0]):
        j = int(np.argmax(np.abs(flipped[i])))
        if flipped[i, j] < 0:
            flipped[i] = -flipped[i]
    return flipped


def identify_bias_subspace(
    sets: tuple[ResolvedSet, ...],
    store: EmbeddingStore,
    k: int | None = None,
    variance_threshold: float | None = None,
) -> BiasSubspace:
    """PCA over the deviation rows; keep the top components.

    Exactly one of ``k`` and ``variance_threshold`` may be given (default
    ``k=1``). With a threshold t in (0, 1], k becomes the smallest count
    whose cumulative explained-variance ratio reaches t. The deviation
    rows are decomposed directly by SVD (their per-set means are already
    zero); eigenvalues use the population divisor (total row count).
    """
    if k is not None and variance_threshold is not None:
        raise DataError("conflicting-k", "give either k or variance_threshold, not both")
    if variance_threshold is not None and not 0.0 < variance_threshold <= 1.0:
        raise DataError("bad-threshold", f"variance threshold must be in (0, 1], got {variance_threshold}")
    if k is None and variance_threshold is None:
        k = 1
    if k is not None and k < 1:
        raise DataError("bad-count", f"k must be >= 1, got {k}")

    deviations = deviation_matrix(sets, store)
    _, singular, vt = np.linalg.svd(deviations, full_matrices=False)
    # Constant sets leave rounding dust rather than exact zeros; measure the
    # deviations against the scale of the embeddings that produced them.
    used = sorted({i for rset in sets for i in rset.indices})
    scale = float(np.linalg.norm(store.matrix[used], axis=1).max(initial=0.0))
    if singular.size == 0 or singular[0] <= scale * max(deviations.shape) * _RANK_RTOL_FACTOR * 4:
        raise DataError(
            "degenerate-deviations",
            "deviation matrix is all zeros (every defining set is a single point)",
        )
    rank = int(np.sum(singular > singular[0] * max(deviations.shape) * _RANK_RTOL_FACTOR))

    n_rows = deviations.shape[0]
    eigenvalues = singular**2 / n_rows
    total = float(eigenvalues.sum())
    ratios = eigenvalues / total

    if variance_threshold is not None:
        cumulative = np.cumsum(ratios)
        reached = np.nonzero(cumulative >= variance_threshold - 1e-12)[0]
        k = int(reached[0]) + 1 if reached.size else rank
        k = min(k, rank)
    elif k > rank:
        raise DataError("k-exceeds-rank", f"requested k={k} but deviation rows have rank {rank}")

    basis = _apply_sign_convention(vt[:k])
    return BiasSubspace(
        basis=basis,
        eigenvalues=eigenvalues[:k],
        explained_variance_ratio=ratios[:k],
        source={"defining_sets": [s.name for s in sets], "k": int(k)},
    )


def project(vector: np.ndarray, subspace: BiasSubspace) -> np.ndarray:
    """Component of the vector inside the subspace: sum_i <w, b_i> b_i."""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (subspace.dim,):
        raise DataError(
            "dimension-mismatch", f"vector has shape {vector.shape}, subspace dim {subspace.dim}"
        )
    return subspace.basis.T @ (subspace.basis @ vector)


def project_rows(matrix: np.ndarray, subspace: BiasSubspace) -> np.ndarray:
    """Row-wise projection of a matrix into the subspace."""
    return (matrix @ subspace.basis.T) @ subspace.basis
