"""Dictionary-based clinical concept extraction.

Concepts are found by case-insensitive longest-match lookup over word
boundaries. Each mention is tagged with its semantic group (problem or
intervention) and with three context flags that mark mentions which should
not reach the guidance signal: negated, familial and non-diagnostic
(facility/specialism) uses.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Protocol

PROBLEM = "problem"
INTERVENTION = "intervention"

# SNOMED-CT semantic tag groupings used for problem vs intervention terms.
DEFAULT_TYPE_GROUPS: dict[str, str] = {
    "T-11": PROBLEM,  # disorder
    "T-18": PROBLEM,  # clinical finding
    "T-29": PROBLEM,  # morphologic abnormality
    "T-35": PROBLEM,  # organism
    "T-38": PROBLEM,  # physical object
    "T-9": INTERVENTION,  # clinical drug
    "T-26": INTERVENTION,  # medicinal product
    "T-27": INTERVENTION,  # medicinal product form
    "T-39": INTERVENTION,  # procedure
    "T-40": INTERVENTION,  # product
    "T-55": INTERVENTION,  # substance
}

_WORD = re.compile(r"\w+")
_SENTENCE_BREAK = re.compile(r"[.!?;\n]")


@dataclass(frozen=True)
class ContextRules:
    negation_cues: tuple[str, ...] = ("no", "denies", "without", "negative for")
    negation_window: int = 4
    familial_cues: tuple[str, ...] = ("mother", "father", "family history")
    familial_window: int = 6
    facility_cues: tuple[str, ...] = ("clinic", "ward", "team")
    facility_window: int = 2


DEFAULT_RULES = ContextRules()


@dataclass(frozen=True)
class ContextFlags:
    negated: bool = False
    familial: bool = False
    non_diagnosis_use: bool = False

    @property
    def excluded(self) -> bool:
        return self.negated or self.familial or self.non_diagnosis_use


@dataclass(frozen=True)
class ConceptMention:
    concept_id: str
    surface: str
    char_start: int
    char_end: int
    group: str
    type_id: str
    flags: ContextFlags = ContextFlags()


@dataclass
class ConceptDictionary:
    """Surface form (lowercased) -> (concept_id, type_id)."""

    entries: dict[str, tuple[str, str]]
    type_groups: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_TYPE_GROUPS))

    def __post_init__(self):
        if not self.entries:
            raise ValueError("concept dictionary is empty")
        self.entries = {" ".join(k.lower().split()): v for k, v in self.entries.items()}
        missing = {t for _, t in self.entries.values()} - set(self.type_groups)
        if missing:
            raise ValueError(f"type ids without a group mapping: {sorted(missing)}")
        bad = set(self.type_groups.values()) - {PROBLEM, INTERVENTION}
        if bad:
            raise ValueError(f"unknown type groups: {sorted(bad)}")
        self._by_first: dict[str, list[tuple[tuple[str, ...], str]]] = {}
        for surface in self.entries:
            words = tuple(_WORD.findall(surface))
            self._by_first.setdefault(words[0], []).append((words, surface))
        for cands in self._by_first.values():
            cands.sort(key=lambda c: -len(c[0]))

    def group_of(self, concept_id: str) -> str | None:
        for cid, type_id in self.entries.values():
            if cid == concept_id:
                return self.type_groups[type_id]
        return None

    def surfaces(self, group: str | None = None) -> list[str]:
        return sorted(
            s for s, (_, t) in self.entries.items() if group is None or self.type_groups[t] == group
        )

    @classmethod
    def from_tsv(cls, path: str | Path, type_groups: dict[str, str] | None = None) -> "ConceptDictionary":
        with open(path, newline="", encoding="utf-8") as fh:
            return cls._from_rows(fh, type_groups)

    @classmethod
    def default(cls) -> "ConceptDictionary":
        text = resources.files("bhcsum.data").joinpath("concepts.tsv").read_text(encoding="utf-8")
        return cls._from_rows(text.splitlines(), None)

    @classmethod
    def _from_rows(cls, lines: Iterable[str], type_groups) -> "ConceptDictionary":
        entries = {}
        for row in csv.reader(lines, delimiter="\t"):
            if not row or row[0].startswith("#") or row[0] == "surface":
                continue
            surface, concept_id, type_id = (c.strip() for c in row[:3])
            entries[surface.lower()] = (concept_id, type_id)
        return cls(entries, dict(type_groups) if type_groups else dict(DEFAULT_TYPE_GROUPS))

    def to_tsv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
            writer.writerow(["surface", "concept_id", "type_id"])
            for surface in sorted(self.entries):
                writer.writerow([surface, *self.entries[surface]])


class ConceptExtractor(Protocol):
    def __call__(self, text: str, dictionary: ConceptDictionary) -> list[ConceptMention]: ...


def _words(text: str, start: int = 0, end: int | None = None):
    return [(m.group().lower(), m.start(), m.end()) for m in _WORD.finditer(text, start, len(text) if end is None else end)]


def _cue_in(window: list[str], cues: Iterable[str]) -> bool:
    for cue in cues:
        parts = cue.split()
        n = len(parts)
        for i in range(len(window) - n + 1):
            if window[i : i + n] == parts:
                return True
    return False


def apply_context_filters(text: str, mention: ConceptMention, rules: ContextRules = DEFAULT_RULES) -> ContextFlags:
    """Flag a mention from cue words around it, without crossing a sentence break."""
    left_bound = 0
    for m in _SENTENCE_BREAK.finditer(text, 0, mention.char_start):
        left_bound = m.end()
    right = _SENTENCE_BREAK.search(text, mention.char_end)
    right_bound = right.start() if right else len(text)
    left = [w for w, _, _ in _words(text, left_bound, mention.char_start)]
    right_words = [w for w, _, _ in _words(text, mention.char_end, right_bound)]
    return ContextFlags(
        negated=_cue_in(left[-rules.negation_window :], rules.negation_cues),
        familial=_cue_in(left[-rules.familial_window :], rules.familial_cues),
        non_diagnosis_use=_cue_in(right_words[: rules.facility_window], rules.facility_cues),
    )


def extract(text: str, dictionary: ConceptDictionary, rules: ContextRules = DEFAULT_RULES) -> list[ConceptMention]:
    """Case-insensitive dictionary scan over word boundaries.

    Overlapping candidates are resolved longest-first, then leftmost, so the
    returned mentions never overlap. Output is in text order.
    """
    words = _words(text)
    tokens = [w for w, _, _ in words]
    candidates = []
    for i, first in enumerate(tokens):
        for cand, surface in dictionary._by_first.get(first, ()):
            n = len(cand)
            if tuple(tokens[i : i + n]) == cand:
                candidates.append((i, n, surface))
    candidates.sort(key=lambda c: (-c[1], c[0]))
    taken = [False] * len(tokens)
    chosen = []
    for i, n, surface in candidates:
        if any(taken[i : i + n]):
            continue
        for j in range(i, i + n):
            taken[j] = True
        chosen.append((i, n, surface))
    chosen.sort()

    mentions = []
    for i, n, surface in chosen:
        start, end = words[i][1], words[i + n - 1][2]
        concept_id, type_id = dictionary.entries[surface]
        mention = ConceptMention(
            concept_id=concept_id,
            surface=text[start:end],
            char_start=start,
            char_end=end,
            group=dictionary.type_groups[type_id],
            type_id=type_id,
        )
        mentions.append(replace(mention, flags=apply_context_filters(text, mention, rules)))
    return mentions


def retained(mentions: Iterable[ConceptMention]) -> list[ConceptMention]:
    return [m for m in mentions if not m.flags.excluded]


@dataclass(frozen=True)
class TermStats:
    n_terms: int
    n_unique_terms: int
    n_words: int
    term_density: float | None
    unique_term_density: float | None


def term_stats(text: str, mentions: list[ConceptMention]) -> TermStats:
    n_words = len(_WORD.findall(text))
    n_terms = len(mentions)
    n_unique = len({m.concept_id for m in mentions})
    return TermStats(
        n_terms=n_terms,
        n_unique_terms=n_unique,
        n_words=n_words,
        term_density=n_words / n_terms if n_terms else None,
        unique_term_density=n_words / n_unique if n_unique else None,
    )
