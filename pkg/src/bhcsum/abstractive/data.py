"""Turn admissions into integer training examples."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from ..concepts import ConceptDictionary, extract
from ..corpus import Admission, assemble_source, source_text
from ..errors import MisalignedGuidance
from ..guidance import build_guidance
from ..tokenizer import BPETokenizer


@dataclass
class TrainingExample:
    admission_id: str
    source: list[int]
    target: list[int]
    guidance: list[int] | None = None

    def __post_init__(self):
        if self.guidance is not None and len(self.guidance) != len(self.source):
            raise MisalignedGuidance(
                f"{self.admission_id}: guidance length {len(self.guidance)} != source length {len(self.source)}"
            )


def head_tail(seq: Sequence, limit: int) -> list:
    """Keep the first and last halves when ``seq`` is longer than ``limit``."""
    if len(seq) <= limit:
        return list(seq)
    head = (limit + 1) // 2
    tail = limit - head
    return list(seq[:head]) + (list(seq[len(seq) - tail :]) if tail else [])


def encode_target(text: str, tokenizer: BPETokenizer, max_tgt_len: int) -> list[int]:
    """BOS + text + EOS, cut so teacher-forced inputs fit ``max_tgt_len`` positions."""
    ids = tokenizer.encode_ids(text)[: max_tgt_len - 1]
    return [tokenizer.bos_id] + ids + [tokenizer.eos_id]


def encode_source(
    admission: Admission,
    tokenizer: BPETokenizer,
    max_src_len: int,
    dictionary: ConceptDictionary | None = None,
    guidance_kind: str | None = None,
    max_sentences: int = 1000,
) -> tuple[list[int], list[int] | None]:
    text = source_text(assemble_source(admission, max_sentences))
    tokens = tokenizer.encode(text)
    guidance = None
    if guidance_kind is not None:
        if dictionary is None:
            raise ValueError("guidance needs a concept dictionary")
        guidance = build_guidance(tokens, extract(text, dictionary), guidance_kind, tokenizer.pad_id).tokens
        guidance = head_tail(guidance, max_src_len)
    return head_tail([t.id for t in tokens], max_src_len), guidance


def build_examples(
    admissions: Iterable[Admission],
    tokenizer: BPETokenizer,
    max_src_len: int,
    max_tgt_len: int,
    dictionary: ConceptDictionary | None = None,
    guidance_kind: str | None = None,
) -> list[TrainingExample]:
    out = []
    for adm in admissions:
        src, guide = encode_source(adm, tokenizer, max_src_len, dictionary, guidance_kind)
        tgt = encode_target(adm.reference_bhc, tokenizer, max_tgt_len)
        out.append(TrainingExample(adm.admission_id, src, tgt, guide))
    return out


def corpus_texts(admissions: Iterable[Admission]) -> list[str]:
    """Source and reference text of every admission, for tokenizer training."""
    texts = []
    for adm in admissions:
        texts.append(source_text(assemble_source(adm)))
        texts.append(adm.reference_bhc)
    return texts
