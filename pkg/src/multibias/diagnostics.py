"""Bias diagnostics: analogy generation and neighborhood cluster analysis.

Analogies rank word pairs (x, y) by the cosine between x - y and the seed
offset a - b, keeping pairs whose embeddings are close (||x - y|| <= delta)
and intersecting the per-store top lists when several stores are given, so
only pairs stable across spaces survive.

The cluster analysis measures residual grouping after debiasing: for each
class direction, how many of a profession's nearest neighbors carried
positive bias in the original space, correlated against the profession's
own original bias.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .lexicon import ResolvedSet
from .stats import pearson_r, spearman_rho
from .store import EmbeddingStore, nearest_neighbors


@dataclass(frozen=True)
class AnalogyCandidate:
    x: str
    y: str
    score: float
    seed: tuple[str, str]


@dataclass(frozen=True, eq=False)
class ClassClusterBias:
    class_token: str
    direction: np.ndarray
    top_biased: tuple[tuple[str, float], ...]
    professions: tuple[str, ...]
    original_bias: tuple[float, ...]
    neighbor_counts: dict[str, tuple[int, ...]]
    pearson: dict[str, float | None]
    spearman: dict[str, float | None]


@dataclass(frozen=True)
class ClusterBiasReport:
    classes: tuple[ClassClusterBias, ...]
    m: int
    n: int
    metadata: dict
    warnings: tuple[str, ...] = ()


def _pair_scores(store: EmbeddingStore, seed: tuple[str, str], delta: float | None) -> dict[tuple[str, str], float]:
    a, b = seed
    for word in (a, b):
        if word not in store:
            raise DataError("missing-token", f"analogy seed word {word!r} not in vocabulary")
    offset = store.row(a) - store.row(b)
    offset_norm = np.linalg.norm(offset)
    if offset_norm == 0.0:
        raise DataError("degenerate-seed", f"seed words {a!r} and {b!r} have identical embeddings")
    unit_offset = offset / offset_norm

    matrix = store.matrix
    vocab = store.vocab
    banned = {a, b}
    scores: dict[tuple[str, str], float] = {}
    for i, x in enumerate(vocab):
        if x in banned:
            continue
        diffs = matrix[i] - matrix
        norms = np.linalg.norm(diffs, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = (diffs @ unit_offset) / norms
        for j, y in enumerate(vocab):
            if j == i or y in banned or norms[j] == 0.0:
                continue
            if delta is not None and norms[j] > delta:
                continue
            scores[(x, y)] = float(cos[j])
    return scores


def generate_analogies(
    stores: EmbeddingStore | Sequence[EmbeddingStore],
    seed: tuple[str, str],
    top: int,
    delta: float | None = 1.0,
) -> list[AnalogyCandidate]:
    """Pairs analogous to the seed offset, stable across all given stores.

    Per store the candidates are the `top` pairs by cos(a - b, x - y)
    subject to ||x - y|| <= delta, excluding pairs that reuse a seed word.
    The result is the intersection of the per-store lists ordered by mean
    score (ties lexicographic). Runs in O(|V|^2 d) per store.
    """
    if isinstance(stores, EmbeddingStore):
        stores = (stores,)
    if not stores:
        raise DataError("empty-set", "need at least one store for analogy generation")
    if top < 1:
        raise DataError("bad-count", f"top must be >= 1, got {top}")

    top_lists: list[dict[tuple[str, str], float]] = []
    for store in stores:
        scores = _pair_scores(store, seed, delta)
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:top]
        top_lists.append(dict(ranked))

    shared = set(top_lists[0])
    for entry in top_lists[1:]:
        shared &= set(entry)
    candidates = [
        AnalogyCandidate(x, y, float(np.mean([entry[(x, y)] for entry in top_lists])), tuple(seed))
        for (x, y) in shared
    ]
    candidates.sort(key=lambda c: (-c.score, c.x, c.y))
    return candidates


def bias_direction(class_token: str, defining_set: ResolvedSet, store: EmbeddingStore) -> np.ndarray:
    """Unit vector from the defining-set mean toward one class embedding."""
    if class_token not in defining_set.words:
        raise DataError(
            "class-not-in-set",
            f"{class_token!r} is not a member of defining set {defining_set.name!r}",
        )
    rows = store.matrix[list(defining_set.indices)]
    direction = store.row(class_token) - rows.mean(axis=0)
    norm = np.linalg.norm(direction)
    if norm <= 1e-12:
        raise DataError("class-at-mean", f"{class_token!r} coincides with its defining-set mean")
    return direction / norm


def _scored_top(store: EmbeddingStore, direction: np.ndarray, n: int) -> list[tuple[str, float]]:
    components = store.matrix @ np.asarray(direction, dtype=np.float64)
    ranked = sorted(zip(store.vocab, components), key=lambda kv: (-kv[1], kv[0]))
    return [(w, float(c)) for w, c in ranked[:n]]


def top_biased_words(store: EmbeddingStore, direction: np.ndarray, n: int) -> list[str]:
    """The n tokens with the largest component along the direction."""
    if n < 1:
        raise DataError("bad-count", f"n must be >= 1, got {n}")
    return [w for w, _ in _scored_top(store, direction, n)]


def cluster_bias_report(
    biased_store: EmbeddingStore,
    debiased_store: EmbeddingStore,
    defining_set: ResolvedSet,
    professions: Sequence[str],
    m: int = 100,
    n: int = 500,
) -> ClusterBiasReport:
    """Residual neighborhood clustering of professions, per class direction.

    Bias directions and bias signs always come from the biased store;
    neighbor lists come from the store under analysis (the profession word
    itself is excluded). Counted neighbors must exist in the biased store,
    so both stores should cover the same vocabulary.
    """
    if m < 1 or n < 1:
        raise DataError("bad-count", f"m and n must be >= 1, got m={m}, n={n}")
    if not professions:
        raise DataError("empty-set", "no profession words given")
    for word in professions:
        for label, store in (("biased", biased_store), ("debiased", debiased_store)):
            if word not in store:
                raise DataError("missing-token", f"profession {word!r} not in the {label} store")

    entries = []
    warnings: list[str] = []
    for class_token in defining_set.words:
        direction = bias_direction(class_token, defining_set, biased_store)
        original = tuple(float(biased_store.row(w) @ direction) for w in professions)
        counts: dict[str, tuple[int, ...]] = {}
        pearsons: dict[str, float | None] = {}
        spearmans: dict[str, float | None] = {}
        for label, store in (("biased", biased_store), ("debiased", debiased_store)):
            per_word = []
            for word in professions:
                neighbors = nearest_neighbors(store, store.word_vector(word), m, exclude={word})
                positive = 0
                for neighbor, _ in neighbors:
                    if neighbor not in biased_store:
                        raise DataError(
                            "missing-token",
                            f"neighbor {neighbor!r} absent from the biased store;"
                            " cluster analysis requires stores over one vocabulary",
                        )
                    if float(biased_store.row(neighbor) @ direction) > 0.0:
                        positive += 1
                per_word.append(positive)
            counts[label] = tuple(per_word)
            try:
                pearsons[label] = pearson_r(original, per_word)
                spearmans[label] = spearman_rho(original, per_word)
            except DataError as err:
                if err.code != "constant-input":
                    raise
                # Degenerate counts (or biases) leave the correlation undefined;
                # report null rather than aborting the whole diagnostic.
                pearsons[label] = None
                spearmans[label] = None
                warnings.append(
                    f"correlation undefined for class {class_token!r} in the {label} store"
                    " (constant neighbor counts or biases)"
                )
        entries.append(
            ClassClusterBias(
                class_token=class_token,
                direction=direction,
                top_biased=tuple(_scored_top(biased_store, direction, n)),
                professions=tuple(professions),
                original_bias=original,
                neighbor_counts=counts,
                pearson=pearsons,
                spearman=spearmans,
            )
        )
    meta = {
        "neighbor_excludes_self": True,
        "positive_bias_rule": "component strictly greater than zero",
        "bias_measured_in": "biased store",
    }
    return ClusterBiasReport(tuple(entries), m, n, meta, tuple(warnings))
