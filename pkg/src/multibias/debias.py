"""Shared debiasing plumbing: result type, neutral-word selection, provenance."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .errors import DataError
from .lexicon import ResolvedLexicon
from .report import canonical_dumps
from .store import EmbeddingStore


@dataclass(frozen=True)
class DebiasResult:
    """A debiased store plus a record of what was changed and how."""

    store: EmbeddingStore
    method: str
    k: int
    lambda_: float | None
    neutralized: tuple[str, ...]
    equalized: tuple[tuple[str, ...], ...]
    provenance: dict
    warnings: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        equality_tokens = {w for group in self.equalized for w in group}
        overlap = equality_tokens.intersection(self.neutralized)
        if overlap:
            raise DataError(
                "neutral-overlaps-equality",
                f"tokens both neutralized and equalized: {sorted(overlap)}",
            )


def neutral_tokens(store: EmbeddingStore, resolved: ResolvedLexicon) -> tuple[str, ...]:
    """Words selected for neutralization by the lexicon's neutral policy.

    ``all-but-equality`` selects the whole vocabulary minus every
    equality-set member, in vocabulary order. An explicit list that names
    an equality-set member is an error (a word cannot be both).
    """
    equality = {w for rset in resolved.equality_sets for w in rset.words}
    if resolved.neutral is None:
        return tuple(w for w in store.vocab if w not in equality)
    overlap = equality.intersection(resolved.neutral.words)
    if overlap:
        raise DataError(
            "neutral-overlaps-equality",
            f"explicit neutral list names equality-set tokens: {sorted(overlap)}",
        )
    return resolved.neutral.words


def parameter_hash(params: dict) -> str:
    return hashlib.sha256(canonical_dumps(params).encode("utf-8")).hexdigest()


def build_provenance(method: str, resolved: ResolvedLexicon, params: dict) -> dict:
    body = {"method": method, "lexicon_digest": resolved.digest, **params}
    return {**body, "parameter_hash": parameter_hash(body)}
