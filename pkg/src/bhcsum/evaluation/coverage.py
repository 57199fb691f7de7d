"""Clinical-concept coverage of a generated summary against its reference."""

from __future__ import annotations

from dataclasses import dataclass

from ..concepts import INTERVENTION, PROBLEM, ConceptDictionary, extract, retained


@dataclass(frozen=True)
class ConceptCoverage:
    pct_problem: float | None
    pct_intervention: float | None
    pct_total: float | None


def _pct(found: set, wanted: set) -> float | None:
    if not wanted:
        return None
    return 100.0 * len(found & wanted) / len(wanted)


def concept_ids(text: str, dictionary: ConceptDictionary) -> dict[str, set[str]]:
    ids: dict[str, set[str]] = {PROBLEM: set(), INTERVENTION: set()}
    for m in retained(extract(text, dictionary)):
        ids[m.group].add(m.concept_id)
    return ids


def concept_coverage(generated: str, reference: str, dictionary: ConceptDictionary) -> ConceptCoverage:
    """Percent of the reference's unique concept ids that the generated text also has."""
    gen = concept_ids(generated, dictionary)
    ref = concept_ids(reference, dictionary)
    return ConceptCoverage(
        pct_problem=_pct(gen[PROBLEM], ref[PROBLEM]),
        pct_intervention=_pct(gen[INTERVENTION], ref[INTERVENTION]),
        pct_total=_pct(gen[PROBLEM] | gen[INTERVENTION], ref[PROBLEM] | ref[INTERVENTION]),
    )
