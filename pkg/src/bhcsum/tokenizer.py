"""Byte-pair subword tokenizer with character offsets.

Text is pre-split into words and single punctuation marks; a word preceded by
whitespace carries a leading ``▁`` marker, so decoding is a plain join.
Merges are learned by frequency with ties broken lexicographically, which
keeps training deterministic.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

PAD, BOS, EOS, UNK = "<pad>", "<s>", "</s>", "<unk>"
SPECIALS = (PAD, BOS, EOS, UNK)
SPACE = "▁"

_PRETOKEN = re.compile(r"\w+|[^\w\s]")


@dataclass(frozen=True)
class Token:
    id: int
    start: int
    end: int


def pretokenize(text: str) -> list[tuple[str, int, int]]:
    """(symbol string, char start, char end); the marker is not part of the span."""
    out = []
    for m in _PRETOKEN.finditer(text):
        s = m.start()
        prefix = SPACE if s > 0 and text[s - 1].isspace() else ""
        out.append((prefix + m.group(), s, m.end()))
    return out


class BPETokenizer:
    pad_id, bos_id, eos_id, unk_id = 0, 1, 2, 3

    def __init__(self, vocab: list[str], merges: list[tuple[str, str]]):
        if tuple(vocab[:4]) != SPECIALS:
            raise ValueError("vocabulary must start with the special tokens")
        self.vocab = list(vocab)
        self.merges = [tuple(m) for m in merges]
        self.token_to_id = {t: i for i, t in enumerate(self.vocab)}
        self.ranks = {m: r for r, m in enumerate(self.merges)}
        self._cache: dict[str, list[str]] = {}

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @classmethod
    def train(cls, texts: Iterable[str], vocab_size: int = 8000, min_frequency: int = 2) -> "BPETokenizer":
        counts = Counter(sym for text in texts for sym, _, _ in pretokenize(text))
        alphabet = sorted({ch for word in counts for ch in word})
        vocab = list(SPECIALS) + alphabet
        words = {w: list(w) for w in counts}
        merges = []
        while len(vocab) < vocab_size:
            pairs: Counter = Counter()
            for w, syms in words.items():
                c = counts[w]
                for a, b in zip(syms, syms[1:]):
                    pairs[(a, b)] += c
            if not pairs:
                break
            best_count = max(pairs.values())
            if best_count < min_frequency:
                break
            best = min(p for p, c in pairs.items() if c == best_count)
            merges.append(best)
            merged = best[0] + best[1]
            vocab.append(merged)
            for w, syms in words.items():
                if len(syms) < 2:
                    continue
                out, i = [], 0
                while i < len(syms):
                    if i + 1 < len(syms) and syms[i] == best[0] and syms[i + 1] == best[1]:
                        out.append(merged)
                        i += 2
                    else:
                        out.append(syms[i])
                        i += 1
                words[w] = out
        return cls(vocab, merges)

    def _bpe(self, word: str) -> list[str]:
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        syms = list(word)
        while len(syms) > 1:
            ranked = [(self.ranks.get((a, b), None), i) for i, (a, b) in enumerate(zip(syms, syms[1:]))]
            ranked = [(r, i) for r, i in ranked if r is not None]
            if not ranked:
                break
            r, i = min(ranked)
            syms = syms[:i] + [syms[i] + syms[i + 1]] + syms[i + 2 :]
        self._cache[word] = syms
        return syms

    def encode(self, text: str) -> list[Token]:
        tokens = []
        for word, start, _ in pretokenize(text):
            pos = start - (1 if word.startswith(SPACE) else 0)
            for piece in self._bpe(word):
                ids = [self.token_to_id.get(piece)]
                pieces = [piece]
                if ids[0] is None:
                    # unseen piece: fall back to characters, then <unk>
                    pieces = list(piece)
                    ids = [self.token_to_id.get(ch, self.unk_id) for ch in pieces]
                for p, tid in zip(pieces, ids):
                    s = pos + (1 if p.startswith(SPACE) else 0)
                    e = pos + len(p)
                    tokens.append(Token(tid, s, e))
                    pos = e
        return tokens

    def encode_ids(self, text: str) -> list[int]:
        return [t.id for t in self.encode(text)]

    def decode(self, ids: Iterable[int]) -> str:
        parts = []
        for i in ids:
            if i in (self.pad_id, self.bos_id):
                continue
            if i == self.eos_id:
                break
            parts.append(self.vocab[i] if 0 <= i < len(self.vocab) else UNK)
        return "".join(parts).replace(SPACE, " ").strip()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps({"vocab": self.vocab, "merges": [list(m) for m in self.merges]}, ensure_ascii=False),
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "BPETokenizer":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(obj["vocab"], [tuple(m) for m in obj["merges"]])
