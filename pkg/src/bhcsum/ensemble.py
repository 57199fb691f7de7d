"""Extractive prefix followed by abstractive continuation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .abstractive.data import encode_source
from .abstractive.generate import Decoding, generate
from .abstractive.model import Seq2Seq
from .concepts import ConceptDictionary
from .corpus import Admission, assemble_source
from .errors import ConfigError
from .extractive import RankedSentence, select_top_k
from .sentences import SentenceRecord
from .tokenizer import BPETokenizer

Ranker = Callable[[Sequence[SentenceRecord]], list[RankedSentence]]


@dataclass
class EnsembleConfig:
    n_extractive_sentences: int
    extractive_model: Ranker | None
    abstractive_model: Seq2Seq
    tokenizer: BPETokenizer
    dictionary: ConceptDictionary | None = None
    guidance_kind: str | None = None
    decoding: Decoding = Decoding()
    embed: Callable[[list[SentenceRecord]], list[SentenceRecord]] | None = None

    def __post_init__(self):
        if self.n_extractive_sentences < 0:
            raise ConfigError("n_extractive_sentences must be >= 0")
        if self.n_extractive_sentences > 0 and self.extractive_model is None:
            raise ConfigError("an extractive model is required when n > 0")
        guided = self.abstractive_model.config.guided
        if guided and self.guidance_kind is None:
            raise ConfigError("guided abstractive model needs a guidance_kind")
        if not guided and self.guidance_kind is not None:
            raise ConfigError("guidance_kind given for a plain abstractive model")


def extractive_prefix(admission: Admission, config: EnsembleConfig) -> str:
    """Top-n sentences in source order, joined by single spaces."""
    if config.n_extractive_sentences == 0:
        return ""
    records = assemble_source(admission)
    if config.embed is not None:
        records = config.embed(records)
    ranked = config.extractive_model(records)
    return select_top_k(ranked, config.n_extractive_sentences).text


def summarise(admission: Admission, config: EnsembleConfig) -> str:
    model = config.abstractive_model
    tok = config.tokenizer
    source, guidance = encode_source(
        admission, tok, model.config.max_src_len, config.dictionary, config.guidance_kind
    )
    prefix_text = extractive_prefix(admission, config)
    prefix = tok.encode_ids(prefix_text)[: model.config.max_tgt_len] if prefix_text else []
    out = generate(model, source, guidance, config.decoding, forced_prefix=prefix)
    continuation = tok.decode(out[len(prefix) :])
    if not prefix_text:
        return continuation
    return f"{prefix_text} {continuation}" if continuation else prefix_text
