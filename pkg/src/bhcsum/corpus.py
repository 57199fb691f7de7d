"""Admissions, note cleaning, BHC extraction, source assembly and splits."""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataError, EmptyAdmission, TooFewAdmissions
from .sentences import SentenceRecord, segment

log = logging.getLogger(__name__)

CATEGORIES = ("nursing", "physician", "radiology", "discharge", "other")

DEFAULT_BHC_HEADERS = [
    r"summary\s+of\s+hospital\s+course\s*:?",
    r"brief\s+hospital\s+course\s*:?",
    r"hospital\s+course\s*:?",
]

# Where the BHC body stops: a header-only line ("Xxx Yyy:"), an all-caps
# header, or a line opening with a known discharge-summary section title.
SECTION_HEADER = (
    r"^[ \t]*(?:"
    r"[A-Za-z][A-Za-z /&()\-]{1,60}:[ \t]*$"
    r"|[A-Z][A-Z /&()\-]{2,60}:"
    r"|(?i:(?:discharge|admission)?\s*(?:medications?|diagnos[ie]s|disposition|condition|instructions)"
    r"|follow[- ]?up|pertinent results|physical exam|allergies|major surgical)[A-Za-z /&()\-]{0,40}:"
    r")"
)

DEFAULT_BOILERPLATE = [
    r"\*{2,}[^*\n]*\*{2,}",
    r"(?im)^[ \t]*page \d+ of \d+[ \t]*$",
    r"(?im)^[ \t]*(electronically )?signed by:?[^\n]*$",
    r"(?im)^[ \t]*confidential[^\n]*$",
    r"\[\*\*[^\]]*\*\*\]",
]


@dataclass
class Document:
    doc_id: str
    category: str
    author_id: str
    timestamp: datetime
    text: str

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "category": self.category,
            "author_id": self.author_id,
            "timestamp": self.timestamp.isoformat().replace("+00:00", "Z"),
            "text": self.text,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Document":
        category = obj.get("category", "other")
        if category not in CATEGORIES:
            category = "other"
        return cls(
            doc_id=str(obj["doc_id"]),
            category=category,
            author_id=str(obj.get("author_id", "")),
            timestamp=parse_timestamp(obj["timestamp"]),
            text=obj["text"],
        )


@dataclass
class Admission:
    admission_id: str
    documents: list[Document]
    reference_bhc: str = ""

    def __post_init__(self):
        self.documents = sort_documents(self.documents)

    def to_json(self) -> dict:
        return {
            "admission_id": self.admission_id,
            "documents": [d.to_json() for d in self.documents],
            "reference_bhc": self.reference_bhc,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Admission":
        return cls(
            admission_id=str(obj["admission_id"]),
            documents=[Document.from_json(d) for d in obj["documents"]],
            reference_bhc=obj.get("reference_bhc", ""),
        )


@dataclass
class CorpusSplit:
    train: list[str]
    validation: list[str]
    test: list[str]
    seed: int

    def to_json(self) -> dict:
        return {"seed": self.seed, "train": self.train, "validation": self.validation, "test": self.test}

    @classmethod
    def from_json(cls, obj: dict) -> "CorpusSplit":
        return cls(obj["train"], obj["validation"], obj["test"], obj["seed"])


def parse_timestamp(value: str) -> datetime:
    ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def sort_documents(documents: Iterable[Document]) -> list[Document]:
    return sorted(documents, key=lambda d: (d.timestamp, d.doc_id))


def extract_bhc_section(
    discharge_text: str,
    header_patterns: list[str] = DEFAULT_BHC_HEADERS,
    section_pattern: str = SECTION_HEADER,
) -> str | None:
    """Body of the first BHC header up to the next section header, or None."""
    if not header_patterns:
        raise ValueError("header_patterns must be non-empty")
    best = None
    for pat in header_patterns:
        m = re.search(pat, discharge_text, flags=re.IGNORECASE)
        if m and (best is None or m.start() < best.start()):
            best = m
    if best is None:
        return None
    rest = discharge_text[best.end() :]
    nxt = re.search(section_pattern, rest, flags=re.MULTILINE)
    body = rest[: nxt.start()] if nxt else rest
    body = body.strip()
    return body or None


def clean_note(text: str, boilerplate_patterns: list[str] = DEFAULT_BOILERPLATE) -> str:
    for pat in boilerplate_patterns:
        text = re.sub(pat, " ", text)
    paragraphs = re.split(r"\n[ \t]*\n", text)
    cleaned = [" ".join(p.split()) for p in paragraphs]
    return "\n\n".join(p for p in cleaned if p)


def assemble_source(
    admission: Admission, max_sentences: int = 1000, segmenter=segment
) -> list[SentenceRecord]:
    """Chronological sentence sequence; head and tail halves kept when over the limit."""
    if max_sentences < 2 or max_sentences % 2:
        raise ValueError("max_sentences must be even and >= 2")
    records = []
    for doc in sort_documents(admission.documents):
        if not doc.text.strip():
            continue
        for sent in segmenter(doc.text):
            records.append(SentenceRecord(admission.admission_id, doc.doc_id, len(records), sent))
    if not records:
        raise EmptyAdmission(f"admission {admission.admission_id} has no non-empty documents")
    if len(records) > max_sentences:
        half = max_sentences // 2
        records = records[:half] + records[-half:]
    return records


def source_text(records: list[SentenceRecord]) -> str:
    return " ".join(r.text for r in records)


def make_splits(admission_ids: list[str], seed: int) -> CorpusSplit:
    """Seeded 80/10/10 partition; train takes the rounding remainder."""
    ids = sorted(set(admission_ids))
    if len(ids) < 10:
        raise TooFewAdmissions(f"need at least 10 admissions to split, got {len(ids)}")
    random.Random(seed).shuffle(ids)
    n_val = n_test = len(ids) // 10
    n_train = len(ids) - n_val - n_test
    return CorpusSplit(
        train=ids[:n_train],
        validation=ids[n_train : n_train + n_val],
        test=ids[n_train + n_val :],
        seed=seed,
    )


@dataclass
class IngestStats:
    read: int = 0
    kept: int = 0
    no_bhc: int = 0
    no_documents: int = 0
    dropped_documents: int = 0
    dropped_ids: list[str] = field(default_factory=list)


def ingest_record(
    obj: dict,
    header_patterns: list[str] = DEFAULT_BHC_HEADERS,
    boilerplate_patterns: list[str] = DEFAULT_BOILERPLATE,
    stats: IngestStats | None = None,
) -> Admission | None:
    """Raw record -> cleaned Admission, or None when it cannot be used."""
    stats = stats if stats is not None else IngestStats()
    stats.read += 1
    bhc = extract_bhc_section(obj.get("discharge_summary") or "", header_patterns)
    if bhc is None:
        stats.no_bhc += 1
        stats.dropped_ids.append(str(obj["admission_id"]))
        return None
    docs = []
    for raw in obj.get("documents", []):
        doc = Document.from_json(raw)
        if doc.category == "discharge":
            stats.dropped_documents += 1
            continue
        doc.text = clean_note(doc.text, boilerplate_patterns)
        if not doc.text:
            stats.dropped_documents += 1
            continue
        docs.append(doc)
    if not docs:
        stats.no_documents += 1
        stats.dropped_ids.append(str(obj["admission_id"]))
        return None
    stats.kept += 1
    return Admission(str(obj["admission_id"]), docs, clean_note(bhc, []))


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=False) + "\n")


def load_corpus(path: str | Path) -> list[Admission]:
    return [Admission.from_json(o) for o in read_jsonl(path)]


def save_corpus(path: str | Path, admissions: Iterable[Admission]) -> None:
    write_jsonl(path, (a.to_json() for a in sorted(admissions, key=lambda a: a.admission_id)))


def load_splits(path: str | Path) -> CorpusSplit:
    return CorpusSplit.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def save_splits(path: str | Path, split: CorpusSplit) -> None:
    Path(path).write_text(json.dumps(split.to_json(), indent=2) + "\n", encoding="utf-8")
