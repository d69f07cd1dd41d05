"""Lexicon bundle: defining sets, equality sets, neutral policy, eval sets.

JSON schema::

    {
      "defining_sets": [{"name": str, "words": [str]}],   required
      "equality_sets": [{"name": str, "words": [str]}],   default: defining_sets
      "neutral": "all-but-equality" | [str],              default: "all-but-equality"
      "eval": {"targets": [...], "attributes": [...]},    default: empty
      "analogy_seeds": [[str, str]]                       default: []
    }

Tokens are matched case-sensitively. Every set must be nonempty and free
of internal duplicates.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from .errors import DataError
from .report import canonical_dumps
from .store import EmbeddingStore

ALL_BUT_EQUALITY = "all-but-equality"
MISSING_POLICIES = ("error", "skip")


@dataclass(frozen=True)
class NamedSet:
    name: str
    words: tuple[str, ...]


@dataclass(frozen=True)
class Lexicon:
    """Parsed, validated lexicon. ``neutral`` is None for all-but-equality."""

    defining_sets: tuple[NamedSet, ...]
    equality_sets: tuple[NamedSet, ...]
    neutral: tuple[str, ...] | None
    eval_targets: tuple[NamedSet, ...]
    eval_attributes: tuple[NamedSet, ...]
    analogy_seeds: tuple[tuple[str, str], ...]

    def to_json(self) -> dict:
        doc = {
            "defining_sets": [{"name": s.name, "words": list(s.words)} for s in self.defining_sets],
            "equality_sets": [{"name": s.name, "words": list(s.words)} for s in self.equality_sets],
            "neutral": ALL_BUT_EQUALITY if self.neutral is None else list(self.neutral),
            "analogy_seeds": [list(pair) for pair in self.analogy_seeds],
        }
        ev = {}
        if self.eval_targets:
            ev["targets"] = [{"name": s.name, "words": list(s.words)} for s in self.eval_targets]
        if self.eval_attributes:
            ev["attributes"] = [{"name": s.name, "words": list(s.words)} for s in self.eval_attributes]
        if ev:
            doc["eval"] = ev
        return doc

    @property
    def digest(self) -> str:
        """Content hash of the lexicon, independent of the source file."""
        return hashlib.sha256(canonical_dumps(self.to_json()).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ResolvedSet:
    name: str
    words: tuple[str, ...]
    indices: tuple[int, ...]


@dataclass(frozen=True)
class ResolvedLexicon:
    """Lexicon with tokens replaced by vocabulary row indices."""

    defining_sets: tuple[ResolvedSet, ...]
    equality_sets: tuple[ResolvedSet, ...]
    neutral: ResolvedSet | None
    eval_targets: tuple[ResolvedSet, ...]
    eval_attributes: tuple[ResolvedSet, ...]
    analogy_seeds: tuple[tuple[str, str], ...]
    digest: str
    warnings: tuple[str, ...] = field(default_factory=tuple)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise DataError("schema-violation", message)


def _parse_named_sets(raw, where: str) -> tuple[NamedSet, ...]:
    _require(isinstance(raw, list) and raw, f"{where}: expected a nonempty list of named sets")
    sets = []
    names = set()
    for i, entry in enumerate(raw):
        loc = f"{where}[{i}]"
        _require(isinstance(entry, dict), f"{loc}: expected an object")
        _require(set(entry) == {"name", "words"}, f"{loc}: expected keys 'name' and 'words'")
        name, words = entry["name"], entry["words"]
        _require(isinstance(name, str) and name, f"{loc}: 'name' must be a nonempty string")
        if name in names:
            raise DataError("duplicate-set-name", f"{where}: set name {name!r} appears twice")
        names.add(name)
        sets.append(NamedSet(name, _parse_word_list(words, f"{loc} ({name})")))
    return tuple(sets)


def _parse_word_list(words, where: str) -> tuple[str, ...]:
    _require(isinstance(words, list), f"{where}: expected a list of words")
    if not words:
        raise DataError("empty-set", f"{where}: set is empty")
    seen = set()
    for w in words:
        _require(isinstance(w, str) and w, f"{where}: words must be nonempty strings")
        if w in seen:
            raise DataError("duplicate-word", f"{where}: token {w!r} appears twice")
        seen.add(w)
    return tuple(words)


def parse_lexicon_dict(doc: dict) -> Lexicon:
    _require(isinstance(doc, dict), "lexicon: expected a JSON object")
    unknown = set(doc) - {"defining_sets", "equality_sets", "neutral", "eval", "analogy_seeds"}
    _require(not unknown, f"lexicon: unknown keys {sorted(unknown)}")
    _require("defining_sets" in doc, "lexicon: 'defining_sets' is required")

    defining = _parse_named_sets(doc["defining_sets"], "defining_sets")
    if "equality_sets" in doc:
        equality = _parse_named_sets(doc["equality_sets"], "equality_sets")
    else:
        equality = defining

    neutral_raw = doc.get("neutral", ALL_BUT_EQUALITY)
    if neutral_raw == ALL_BUT_EQUALITY:
        neutral = None
    else:
        _require(isinstance(neutral_raw, list), "neutral: expected 'all-but-equality' or a list of words")
        seen = set()
        for w in neutral_raw:
            _require(isinstance(w, str) and w, "neutral: words must be nonempty strings")
            if w in seen:
                raise DataError("duplicate-word", f"neutral: token {w!r} appears twice")
            seen.add(w)
        neutral = tuple(neutral_raw)

    targets: tuple[NamedSet, ...] = ()
    attributes: tuple[NamedSet, ...] = ()
    if "eval" in doc:
        ev = doc["eval"]
        _require(isinstance(ev, dict), "eval: expected an object")
        _require(set(ev) <= {"targets", "attributes"}, "eval: expected keys 'targets' and 'attributes'")
        if "targets" in ev:
            targets = _parse_named_sets(ev["targets"], "eval.targets")
        if "attributes" in ev:
            attributes = _parse_named_sets(ev["attributes"], "eval.attributes")

    seeds = []
    for i, pair in enumerate(doc.get("analogy_seeds", [])):
        loc = f"analogy_seeds[{i}]"
        _require(
            isinstance(pair, list) and len(pair) == 2 and all(isinstance(w, str) and w for w in pair),
            f"{loc}: expected a pair of words",
        )
        seeds.append((pair[0], pair[1]))

    return Lexicon(defining, equality, neutral, targets, attributes, tuple(seeds))


def parse_lexicon(path: str | os.PathLike) -> Lexicon:
    """Parse and validate a lexicon JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError("schema-violation", f"{path}: not valid JSON ({exc})") from None
    return parse_lexicon_dict(doc)


def lowercased(lexicon: Lexicon) -> Lexicon:
    """Lowercase every token; duplicates created by case folding are errors."""
    doc = lexicon.to_json()

    def lower_sets(sets):
        return [{"name": s["name"], "words": [w.lower() for w in s["words"]]} for s in sets]

    lowered = {
        "defining_sets": lower_sets(doc["defining_sets"]),
        "equality_sets": lower_sets(doc["equality_sets"]),
        "neutral": doc["neutral"] if doc["neutral"] == ALL_BUT_EQUALITY else [w.lower() for w in doc["neutral"]],
        "analogy_seeds": [[a.lower(), b.lower()] for a, b in doc["analogy_seeds"]],
    }
    if "eval" in doc:
        lowered["eval"] = {key: lower_sets(sets) for key, sets in doc["eval"].items()}
    return parse_lexicon_dict(lowered)


def _resolve_set(
    named: NamedSet, store: EmbeddingStore, missing: str, warnings: list[str], where: str
) -> ResolvedSet:
    words, indices = [], []
    for token in named.words:
        if token in store:
            words.append(token)
            indices.append(store.index[token])
        elif missing == "skip":
            warnings.append(f"skipped {token!r} ({where} {named.name!r}): not in vocabulary")
        else:
            raise DataError("missing-token", f"token {token!r} ({where} {named.name!r}) not in vocabulary")
    if not indices:
        raise DataError("empty-after-skip", f"{where} {named.name!r} has no tokens left after skipping")
    return ResolvedSet(named.name, tuple(words), tuple(indices))


def resolve(lexicon: Lexicon, store: EmbeddingStore, missing: str = "error") -> ResolvedLexicon:
    """Replace lexicon tokens by store row indices.

    Under ``missing="skip"`` absent tokens are dropped with a warning per
    token; a set that loses all of its tokens is an error regardless of
    policy. Token order within each set is preserved.
    """
    if missing not in MISSING_POLICIES:
        raise DataError("bad-policy", f"missing policy must be one of {MISSING_POLICIES}, got {missing!r}")
    warnings: list[str] = []
    defining = tuple(_resolve_set(s, store, missing, warnings, "defining set") for s in lexicon.defining_sets)
    equality = tuple(_resolve_set(s, store, missing, warnings, "equality set") for s in lexicon.equality_sets)
    targets = tuple(_resolve_set(s, store, missing, warnings, "target set") for s in lexicon.eval_targets)
    attributes = tuple(_resolve_set(s, store, missing, warnings, "attribute set") for s in lexicon.eval_attributes)

    neutral = None
    if lexicon.neutral is not None:
        if lexicon.neutral:
            neutral = _resolve_set(NamedSet("neutral", lexicon.neutral), store, missing, warnings, "neutral list")
        else:
            neutral = ResolvedSet("neutral", (), ())

    return ResolvedLexicon(
        defining_sets=defining,
        equality_sets=equality,
        neutral=neutral,
        eval_targets=targets,
        eval_attributes=attributes,
        analogy_seeds=lexicon.analogy_seeds,
        digest=lexicon.digest,
        warnings=tuple(warnings),
    )
