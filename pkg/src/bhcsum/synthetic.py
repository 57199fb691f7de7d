"""Seeded synthetic admissions for desk-scale runs.

Each admission is a chronological set of notes with planted concept mentions.
Problems are either *active* (the patient has them) or *distractors* that
only occur negated, as family history, or as a service name ("stroke clinic").
The reference BHC opens with a few sentences (1-5 by default) copied from the
admission note verbatim, then gives one templated sentence per active problem, in
order of first mention. That makes the opening extractive and the remainder
a paraphrase of the active problem list.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

from .concepts import INTERVENTION, PROBLEM, ConceptDictionary
from .corpus import Admission, Document

FILLER = [
    "Slept well overnight.",
    "Observations within normal limits.",
    "Mobilising with assistance of one.",
    "Eating and drinking well.",
    "Pain controlled with simple measures.",
    "Bowels opened today.",
    "Skin intact on inspection.",
    "Weight recorded as {num} kg.",
    "Seen by the dietitian today.",
    "Daughter visited this afternoon.",
    "Blood results reviewed with registrar.",
    "Fluid balance chart maintained.",
    "Comfortable at rest this morning.",
    "Chatting with staff and settled.",
    "Repositioned every {num} hours.",
    "Capillary refill under two seconds.",
    "Urine output adequate over the shift.",
    "Cannula site clean and dry.",
    "Social worker contacted regarding home support.",
    "Temperature {num} point {digit} overnight.",
    "Heart sounds normal on auscultation.",
    "Abdomen soft and nontender.",
    "Reviewed on the morning round.",
    "Walked to the bathroom independently.",
    "Medication chart reconciled by pharmacy.",
]

ACTIVE_STATUS = [
    "Ongoing treatment for {p} with {i}.",
    "{P} improving with {i}.",
    "{P} treated with {i} today.",
    "Continues on {i} for {p}.",
]

ACTIVE_NEW = [
    "New {p} noted overnight.",
    "Commenced {i} for {p}.",
]

DISTRACTOR = {
    "negated": [
        "Denies {d}.",
        "No evidence of {d}.",
        "Screening negative for {d}.",
        "Reassuringly no {d} seen.",
        "Without {d} at present.",
    ],
    "familial": [
        "Mother had {d}.",
        "Family history of {d}.",
        "Father diagnosed with {d} years ago.",
        "Mother recently developed {d}.",
    ],
    "facility": [
        "Previously attended the {d} clinic.",
        "Reviewed by the {d} team.",
        "Letter copied to {d} clinic.",
        "Bed found on the {d} ward.",
    ],
}

RADIOLOGY_ACTIVE = "Imaging consistent with {p}."
RADIOLOGY_NEGATED = "Chest radiograph shows no {d}."

DISCHARGE_FILLER = [
    "Medically fit for discharge home.",
    "Follow up arranged with the general practitioner.",
    "Patient and family updated on the plan.",
]

PARAPHRASE = "{P} was treated with {i}."


@dataclass
class PlantingPlan:
    active: list[str]
    interventions: list[str]
    distractors: list[str]
    n_verbatim: int
    planted_mentions: int = 0
    planted_by_group: dict[str, int] = field(default_factory=lambda: {PROBLEM: 0, INTERVENTION: 0})


def _cap(s: str) -> str:
    return s[:1].upper() + s[1:]


class _Writer:
    """Fills templates and counts every planted concept mention."""

    def __init__(self, rng: random.Random, plan: PlantingPlan):
        self.rng = rng
        self.plan = plan

    def fill(self, template: str, p: str | None = None, i: str | None = None, d: str | None = None) -> str:
        text = template.format(
            p=p, P=_cap(p) if p else p, i=i, d=d,
            num=self.rng.randint(2, 90), digit=self.rng.randint(0, 9),
        )
        if "{p}" in template or "{P}" in template:
            self._count(PROBLEM)
        if "{i}" in template:
            self._count(INTERVENTION)
        if "{d}" in template:
            self._count(PROBLEM)
        return _cap(text)

    def _count(self, group: str):
        self.plan.planted_mentions += 1
        self.plan.planted_by_group[group] += 1


def synthesize_admission(
    rng: random.Random,
    admission_id: str,
    dictionary: ConceptDictionary,
    min_documents: int = 3,
    max_documents: int = 30,
    verbatim_range: tuple[int, int] = (1, 5),
) -> tuple[Admission, PlantingPlan]:
    problems = dictionary.surfaces(PROBLEM) or dictionary.surfaces()
    interventions = dictionary.surfaces(INTERVENTION) or ["standard care"]
    n_active = min(rng.randint(2, 4), len(problems))
    chosen = rng.sample(problems, min(len(problems), n_active + rng.randint(2, 5)))
    active, distractors = chosen[:n_active], chosen[n_active:]
    treat = [rng.choice(interventions) for _ in active]
    plan = PlantingPlan(active, treat, distractors, n_verbatim=rng.randint(*verbatim_range))
    w = _Writer(rng, plan)
    if interventions == ["standard care"]:
        # no intervention entries: the placeholder is not a concept
        w._count = lambda group, _c=w._count: None if group == INTERVENTION else _c(group)

    p0, i0 = active[0], treat[0]
    p1, i1 = active[1 % n_active], treat[1 % n_active]
    opening = [
        w.fill("{num} year old " + rng.choice(["man", "woman"]) + " admitted with {p}.", p=p0),
        w.fill("Background of {p}.", p=p1),
        w.fill("Started on {i} for {p}.", p=p0, i=i0),
        w.fill("Plan to continue {i} for {p}.", p=p1, i=i1),
        "Admitted to the acute medical unit for ongoing care.",
    ]

    n_docs = rng.randint(min_documents, max_documents)
    bodies: list[tuple[str, list[str]]] = [("physician", list(opening))]
    middle = n_docs - 2
    # every active problem after the first two, and every distractor, needs a home
    pending_new = list(range(2, n_active))
    pending_distractors = list(distractors)
    slots = []
    for _ in range(middle):
        cat = rng.choices(["nursing", "physician", "radiology"], weights=[5, 3, 1])[0]
        sents = []
        for _ in range(rng.randint(1, 3)):
            roll = rng.random()
            if cat == "radiology":
                if roll < 0.5:
                    sents.append(w.fill(RADIOLOGY_ACTIVE, p=rng.choice(active)))
                elif distractors:
                    sents.append(w.fill(RADIOLOGY_NEGATED, d=rng.choice(distractors)))
                else:
                    sents.append(w.fill(rng.choice(FILLER)))
            elif roll < 0.45:
                sents.append(w.fill(rng.choice(FILLER)))
            elif roll < 0.85:
                k = rng.randrange(n_active)
                sents.append(w.fill(rng.choice(ACTIVE_STATUS), p=active[k], i=treat[k]))
            elif distractors:
                kind = rng.choice(sorted(DISTRACTOR))
                sents.append(w.fill(rng.choice(DISTRACTOR[kind]), d=rng.choice(distractors)))
            else:
                sents.append(w.fill(rng.choice(FILLER)))
        slots.append((cat, sents))
    # place guaranteed first mentions in chronological order
    for k in pending_new:
        if slots:
            idx = min(len(slots) - 1, (k - 1) * len(slots) // max(1, n_active))
            cat, sents = slots[idx]
            sents.insert(0, w.fill(rng.choice(ACTIVE_NEW), p=active[k], i=treat[k]))
        else:
            opening.append(w.fill(ACTIVE_NEW[1], p=active[k], i=treat[k]))
    for d in pending_distractors:
        kind = rng.choice(sorted(DISTRACTOR))
        sentence = w.fill(rng.choice(DISTRACTOR[kind]), d=d)
        if slots:
            cat, sents = slots[rng.randrange(len(slots))]
            sents.insert(rng.randint(0, len(sents)), sentence)
        else:
            bodies[0][1].append(sentence)
    bodies.extend(slots)
    bodies.append(("physician", [w.fill(rng.choice(DISCHARGE_FILLER)), w.fill(rng.choice(FILLER))]))

    start = datetime(2020, 1, 1, tzinfo=timezone.utc) + timedelta(hours=rng.randint(0, 24 * 365))
    t = start
    documents = []
    for n, (cat, sents) in enumerate(bodies):
        documents.append(
            Document(
                doc_id=f"{admission_id}-D{n:02d}",
                category=cat,
                author_id=f"A{rng.randint(1, 40):02d}",
                timestamp=t,
                text=" ".join(sents),
            )
        )
        t += timedelta(minutes=rng.randint(30, 720))

    # one paraphrase per active problem, in order of first appearance in the notes
    full = " ".join(d.text for d in documents).lower()
    order = sorted(range(n_active), key=lambda k: full.find(active[k]))
    reference = opening[: plan.n_verbatim] + [PARAPHRASE.format(P=_cap(active[k]), i=treat[k]) for k in order]
    return Admission(admission_id, documents, " ".join(reference)), plan


def generate_synthetic_corpus(
    n_admissions: int,
    seed: int,
    concept_dictionary: ConceptDictionary,
    min_documents: int = 3,
    max_documents: int = 30,
    verbatim_range: tuple[int, int] = (1, 5),
) -> list[Admission]:
    return [
        a
        for a, _ in generate_with_plans(
            n_admissions, seed, concept_dictionary, min_documents, max_documents, verbatim_range
        )
    ]


def generate_with_plans(
    n_admissions, seed, concept_dictionary, min_documents=3, max_documents=30, verbatim_range=(1, 5)
):
    if not concept_dictionary.entries:
        raise ValueError("concept dictionary is empty")
    lo, hi = verbatim_range
    if not 0 <= lo <= hi <= 5:
        raise ValueError("verbatim_range must satisfy 0 <= low <= high <= 5")
    rng = random.Random(seed)
    return [
        synthesize_admission(rng, f"ADM{n:05d}", concept_dictionary, min_documents, max_documents, verbatim_range)
        for n in range(n_admissions)
    ]


def to_raw_record(admission: Admission) -> dict:
    """Render an admission in the raw ingest format, discharge note included."""
    last = admission.documents[-1].timestamp if admission.documents else datetime(2020, 1, 1, tzinfo=timezone.utc)
    discharge_text = (
        "Admission Date: [**2020-01-01**]\n"
        "Service: MEDICINE\n\n"
        "Brief Hospital Course:\n"
        f"{admission.reference_bhc}\n\n"
        "Discharge Medications:\n1. As per chart\n\n"
        "Discharge Disposition:\nHome\n"
    )
    docs = [d.to_json() for d in admission.documents]
    docs.append(
        Document(
            f"{admission.admission_id}-DS", "discharge", "A00", last + timedelta(hours=2), discharge_text
        ).to_json()
    )
    return {"admission_id": admission.admission_id, "documents": docs, "discharge_summary": discharge_text}
