import numpy as np
import pytest

from multibias.lexicon import ResolvedLexicon, ResolvedSet
from multibias.store import EmbeddingStore, normalize_all


def random_unit_store(rng, size: int, dim: int, prefix: str = "w") -> EmbeddingStore:
    matrix = rng.normal(size=(size, dim))
    vocab = tuple(f"{prefix}{i:03d}" for i in range(size))
    return normalize_all(EmbeddingStore(vocab, matrix))


def resolved_set(store: EmbeddingStore, name: str, words) -> ResolvedSet:
    return ResolvedSet(name, tuple(words), tuple(store.index[w] for w in words))


def make_resolved(
    store: EmbeddingStore,
    defining,
    equality=None,
    neutral=None,
    targets=(),
    attributes=(),
) -> ResolvedLexicon:
    """Assemble a ResolvedLexicon from word lists against a store.

    ``neutral=None`` means all-but-equality; otherwise pass an explicit
    (possibly empty) word list.
    """
    def sets_of(groups, stem):
        return tuple(
            resolved_set(store, f"{stem}{i}", words) for i, words in enumerate(groups)
        )

    defining_sets = sets_of(defining, "d")
    equality_sets = sets_of(equality, "e") if equality is not None else tuple(
        ResolvedSet(f"e{i}", s.words, s.indices) for i, s in enumerate(defining_sets)
    )
    neutral_set = None
    if neutral is not None:
        neutral_set = ResolvedSet("neutral", tuple(neutral), tuple(store.index[w] for w in neutral))
    return ResolvedLexicon(
        defining_sets=defining_sets,
        equality_sets=equality_sets,
        neutral=neutral_set,
        eval_targets=sets_of(targets, "t"),
        eval_attributes=sets_of(attributes, "a"),
        analogy_seeds=(),
        digest="test",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
