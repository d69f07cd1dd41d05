"""Hard debiasing: neutralize bias-neutral words, equalize class words.

Neutralizing removes a word's bias-subspace component and renormalizes.
Equalizing recenters an equality set outside the subspace and gives every
member an equal-magnitude, direction-preserving component inside it, so
all members end up unit length and equidistant from any neutralized word.
Both steps assume unit-normalized input embeddings.
"""

from __future__ import annotations

import numpy as np

from .debias import DebiasResult, build_provenance, neutral_tokens
from .errors import DataError
from .lexicon import ResolvedLexicon
from .store import EmbeddingStore
from .subspace import BiasSubspace, project

# Below this residual norm a vector counts as lying entirely in the subspace.
_RESIDUAL_TOL = 1e-12


def neutralize(vector: np.ndarray, subspace: BiasSubspace, word: str = "?") -> np.ndarray:
    """Remove the subspace component and rescale to unit length."""
    vector = np.asarray(vector, dtype=np.float64)
    residual = vector - project(vector, subspace)
    norm = np.linalg.norm(residual)
    if norm <= _RESIDUAL_TOL:
        raise DataError(
            "word-in-subspace",
            f"{word!r} lies entirely inside the bias subspace; cannot neutralize",
        )
    return residual / norm


def equalize(
    vectors: np.ndarray, subspace: BiasSubspace, words: tuple[str, ...] | None = None
) -> np.ndarray:
    """Equalize a set of unit vectors with respect to the subspace.

    Every output shares the set mean's out-of-subspace component and gets
    an in-subspace component of equal magnitude along its own direction
    from the mean. A single-member set keeps its own in-subspace direction
    (the direction from the mean is undefined there).
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise DataError("bad-matrix-shape", f"expected a matrix of row vectors, got shape {vectors.shape}")
    names = words if words is not None else tuple(f"member {i}" for i in range(vectors.shape[0]))

    mean = vectors.mean(axis=0)
    mean_inside = project(mean, subspace)
    center = mean - mean_inside
    radicand = 1.0 - float(center @ center)
    if radicand < -_RESIDUAL_TOL:
        raise DataError(
            "equalize-radicand-negative",
            f"equality-set mean lies outside the unit ball (radicand {radicand!r});"
            " embeddings were not unit-normalized",
        )
    magnitude = np.sqrt(max(radicand, 0.0))
    # A set whose members all share one vector is a replicated singleton; its
    # direction from the mean is undefined, so keep each member's own one.
    one_point = vectors.shape[0] == 1 or bool((vectors == vectors[0]).all())

    out = np.empty_like(vectors)
    for i, vector in enumerate(vectors):
        inside = project(vector, subspace)
        direction = inside if one_point else inside - mean_inside
        dnorm = np.linalg.norm(direction)
        if dnorm <= _RESIDUAL_TOL:
            raise DataError(
                "word-at-equality-mean",
                f"{names[i]!r} has no in-subspace direction away from the set mean; cannot equalize",
            )
        out[i] = center + magnitude * (direction / dnorm)
    return out


def hard_debias(
    store: EmbeddingStore, resolved: ResolvedLexicon, subspace: BiasSubspace
) -> DebiasResult:
    """Neutralize words per the lexicon's neutral policy, equalize each equality set.

    Under the all-but-equality policy a word that lies entirely inside the
    subspace is left untouched with a warning; under an explicit neutral
    list the same situation is an error. Rows in neither group are copied
    through unchanged.
    """
    if not store.normalized:
        raise DataError("store-not-normalized", "hard debiasing requires unit-normalized embeddings")

    claimed: dict[str, str] = {}
    for rset in resolved.equality_sets:
        for word in rset.words:
            if word in claimed:
                raise DataError(
                    "overlapping-equality-sets",
                    f"{word!r} appears in equality sets {claimed[word]!r} and {rset.name!r};"
                    " equalization order would be ambiguous",
                )
            claimed[word] = rset.name

    warnings: list[str] = list(resolved.warnings)
    matrix = store.matrix.copy()

    selected = neutral_tokens(store, resolved)
    explicit = resolved.neutral is not None
    neutralized = []
    if selected:
        idx = np.array([store.index[w] for w in selected])
        rows = store.matrix[idx]
        residual = rows - (rows @ subspace.basis.T) @ subspace.basis
        norms = np.linalg.norm(residual, axis=1)
        degenerate = norms <= _RESIDUAL_TOL
        if degenerate.any() and explicit:
            word = selected[int(np.argmax(degenerate))]
            raise DataError(
                "word-in-subspace",
                f"{word!r} lies entirely inside the bias subspace; cannot neutralize",
            )
        for j in np.nonzero(degenerate)[0]:
            warnings.append(f"skipped {selected[j]!r}: entirely inside the bias subspace")
        ok = ~degenerate
        matrix[idx[ok]] = residual[ok] / norms[ok, None]
        neutralized = [w for w, keep in zip(selected, ok) if keep]

    equalized = []
    for rset in resolved.equality_sets:
        if len(rset.words) == 1:
            warnings.append(
                f"equality set {rset.name!r} has a single member; equalizing along its own direction"
            )
        rows = store.matrix[list(rset.indices)]
        matrix[list(rset.indices)] = equalize(rows, subspace, rset.words)
        equalized.append(rset.words)

    provenance = build_provenance(
        "hard",
        resolved,
        {
            "k": subspace.k,
            "lambda": None,
            "neutral_policy": "explicit" if explicit else "all-but-equality",
        },
    )
    return DebiasResult(
        store=EmbeddingStore(store.vocab, matrix, normalized=True),
        method="hard",
        k=subspace.k,
        lambda_=None,
        neutralized=tuple(neutralized),
        equalized=tuple(equalized),
        provenance=provenance,
        warnings=tuple(warnings),
    )
