"""Position-aligned guidance sequences for the guided encoder."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from .concepts import INTERVENTION, PROBLEM, ConceptMention
from .errors import AlignmentError
from .tokenizer import Token

PROBLEM_ONLY = "problem_only"
PROBLEM_AND_INTERVENTION = "problem_and_intervention"
SIGNAL_KINDS = (PROBLEM_ONLY, PROBLEM_AND_INTERVENTION)

_GROUPS = {PROBLEM_ONLY: {PROBLEM}, PROBLEM_AND_INTERVENTION: {PROBLEM, INTERVENTION}}


@dataclass
class GuidanceSequence:
    tokens: list[int]
    signal_kind: str
    pad_id: int = 0

    def __len__(self):
        return len(self.tokens)

    @property
    def is_all_pad(self) -> bool:
        return all(t == self.pad_id for t in self.tokens)


def build_guidance(
    source_tokens: Sequence[Token],
    mentions: Sequence[ConceptMention],
    kind: str = PROBLEM_ONLY,
    pad_id: int = 0,
) -> GuidanceSequence:
    """Copy source tokens that overlap a kept mention; pad everything else.

    A token belongs to a mention when their character spans share at least one
    character. Mentions flagged by the context filters are skipped here too,
    so callers may pass the raw extraction.
    """
    if kind not in _GROUPS:
        raise ValueError(f"unknown guidance kind {kind!r}")
    keep = [m for m in mentions if m.group in _GROUPS[kind] and not m.flags.excluded]
    out = [pad_id] * len(source_tokens)
    # tokens are in text order, so walk them with a moving pointer
    order = sorted(keep, key=lambda m: m.char_start)
    j = 0
    for m in order:
        while j < len(source_tokens) and source_tokens[j].end <= m.char_start:
            j += 1
        k = j
        hit = False
        while k < len(source_tokens) and source_tokens[k].start < m.char_end:
            t = source_tokens[k]
            if t.start < t.end and t.end > m.char_start:
                out[k] = t.id
                hit = True
            k += 1
        if not hit:
            raise AlignmentError(
                f"mention {m.surface!r} at [{m.char_start}, {m.char_end}) covers no source token"
            )
    return GuidanceSequence(out, kind, pad_id)


def shuffled_guidance(sequences: list[list[int]], seed: int, pad_id: int = 0) -> list[list[int]]:
    """Ablation control: give each example another example's guidance.

    Uses a seeded derangement; each borrowed sequence is cut or padded to the
    receiving example's length, so alignment length still holds.
    """
    n = len(sequences)
    if n < 2:
        return [list(s) for s in sequences]
    rng = random.Random(seed)
    perm = list(range(n))
    while any(i == p for i, p in enumerate(perm)):
        rng.shuffle(perm)
    out = []
    for i, p in enumerate(perm):
        borrowed = list(sequences[p][: len(sequences[i])])
        borrowed += [pad_id] * (len(sequences[i]) - len(borrowed))
        out.append(borrowed)
    return out
