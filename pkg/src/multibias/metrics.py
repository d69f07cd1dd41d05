"""Mean average cosine distance (MAC) between target and attribute sets.

Each report cell S(T_i, A_j) is the mean, over target words t in T_i, of
the average cosine distance between t and the words of attribute set A_j.
MAC is the plain mean of all cells; values near 1 mean targets and
attributes are unassociated. Two reports with identical structure can be
compared with a paired t-test over their cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .lexicon import ResolvedSet
from .stats import TTestResult, paired_t_test
from .store import EmbeddingStore


@dataclass(frozen=True, eq=False)
class MacReport:
    target_names: tuple[str, ...]
    attribute_names: tuple[str, ...]
    s_values: np.ndarray
    mac: float
    comparison: TTestResult | None = None
    metadata: dict | None = None

    def cells(self) -> list[dict]:
        """Row-major cell list matching the JSON report schema."""
        out = []
        for i, tname in enumerate(self.target_names):
            for j, aname in enumerate(self.attribute_names):
                out.append({"target": tname, "attributes": aname, "s": float(self.s_values[i, j])})
        return out


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - cos(u, v), clamped to [0, 2]; zero vectors are an error."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DataError("zero-vector", "cosine distance undefined for a zero vector")
    return float(min(2.0, max(0.0, 1.0 - (u @ v) / (nu * nv))))


def s_value(target: np.ndarray, attributes: np.ndarray) -> float:
    """Mean cosine distance between one target vector and each attribute row."""
    attributes = np.asarray(attributes, dtype=np.float64)
    if attributes.ndim != 2 or attributes.shape[0] == 0:
        raise DataError("empty-set", "attribute set must be a nonempty matrix of row vectors")
    return float(np.mean([cosine_distance(target, row) for row in attributes]))


def _unit_rows(store: EmbeddingStore, rset: ResolvedSet) -> np.ndarray:
    rows = store.matrix[list(rset.indices)]
    norms = np.linalg.norm(rows, axis=1)
    if (norms == 0.0).any():
        bad = rset.words[int(np.argmax(norms == 0.0))]
        raise DataError("zero-vector", f"{bad!r} (set {rset.name!r}) has a zero embedding")
    return rows / norms[:, None]


def mac(
    store: EmbeddingStore,
    targets: tuple[ResolvedSet, ...],
    attributes: tuple[ResolvedSet, ...],
    metadata: dict | None = None,
) -> MacReport:
    """Compute every S(T_i, A_j) cell and their mean."""
    if not targets or not attributes:
        raise DataError("no-eval-sets", "MAC needs at least one target set and one attribute set")
    target_rows = [_unit_rows(store, t) for t in targets]
    attribute_rows = [_unit_rows(store, a) for a in attributes]
    s = np.empty((len(targets), len(attributes)))
    for i, trows in enumerate(target_rows):
        for j, arows in enumerate(attribute_rows):
            distances = 1.0 - trows @ arows.T
            s[i, j] = float(np.clip(distances, 0.0, 2.0).mean())
    meta = {
        "cell_granularity": "mean over target words of their average attribute distance",
        "attribute_divisor": "attribute set size",
    }
    if metadata:
        meta.update(metadata)
    return MacReport(
        target_names=tuple(t.name for t in targets),
        attribute_names=tuple(a.name for a in attributes),
        s_values=s,
        mac=float(s.mean()),
        metadata=meta,
    )


def compare(before: MacReport, after: MacReport) -> TTestResult:
    """Paired t-test over matching cells of two structurally identical reports."""
    if before.target_names != after.target_names or before.attribute_names != after.attribute_names:
        raise DataError(
            "structure-mismatch",
            "reports evaluate different target/attribute sets and cannot be paired",
        )
    if before.s_values.shape != after.s_values.shape:
        raise DataError("structure-mismatch", "reports have different cell grids")
    return paired_t_test(before.s_values.ravel(), after.s_values.ravel())
