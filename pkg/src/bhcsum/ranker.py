"""Supervised bidirectional-LSTM sentence ranker.

The model reads an admission's sentence-embedding sequence and emits one
relevance logit per sentence. Training targets are binary Oracle top-k
membership labels.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .checkpoint import read_checkpoint, write_checkpoint
from .errors import DimensionMismatch, EmptyTraining
from .extractive import RankedSentence, rank_by_scores
from .sentences import SentenceRecord

log = logging.getLogger(__name__)


@dataclass
class RankerConfig:
    input_dim: int
    hidden_dim: int = 64
    epochs: int = 30
    batch_size: int = 8
    lr: float = 3e-3
    seed: int = 0
    label_k: int = 15


class BiLSTMScorer(nn.Module):
    def __init__(self, input_dim: int, hidden_dim: int):
        super().__init__()
        self.lstm = nn.LSTM(input_dim, hidden_dim, batch_first=True, bidirectional=True)
        self.out = nn.Linear(2 * hidden_dim, 1)

    def forward(self, x: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        packed = pack_padded_sequence(x, lengths.cpu(), batch_first=True, enforce_sorted=False)
        h, _ = self.lstm(packed)
        h, _ = pad_packed_sequence(h, batch_first=True, total_length=x.shape[1])
        return self.out(h).squeeze(-1)


def _batch(seqs: Sequence[np.ndarray]):
    lengths = torch.tensor([len(s) for s in seqs])
    dim = seqs[0].shape[1]
    x = torch.zeros(len(seqs), int(lengths.max()), dim)
    for i, s in enumerate(seqs):
        x[i, : len(s)] = torch.from_numpy(np.asarray(s, dtype=np.float32))
    return x, lengths


class RankerModel:
    def __init__(self, config: RankerConfig, module: BiLSTMScorer | None = None):
        self.config = config
        if module is None:
            torch.manual_seed(config.seed)
            module = BiLSTMScorer(config.input_dim, config.hidden_dim)
        self.module = module

    def score_embeddings(self, embeddings: np.ndarray) -> np.ndarray:
        emb = np.asarray(embeddings, dtype=np.float32)
        if emb.ndim != 2 or emb.shape[1] != self.config.input_dim:
            raise DimensionMismatch(f"expected embeddings of width {self.config.input_dim}, got shape {emb.shape}")
        self.module.eval()
        with torch.no_grad():
            x, lengths = _batch([emb])
            return self.module(x, lengths)[0].double().numpy()

    def score(self, records: Sequence[SentenceRecord]) -> np.ndarray:
        return self.score_embeddings(np.vstack([r.embedding for r in records]))

    def rank(self, records: Sequence[SentenceRecord]) -> list[RankedSentence]:
        return rank_by_scores(records, self.score(records))

    def save(self, path: str | Path) -> None:
        tensors = {k: v.detach().cpu().numpy() for k, v in self.module.state_dict().items()}
        write_checkpoint(path, "bilstm-ranker", asdict(self.config), tensors)

    @classmethod
    def load(cls, path: str | Path) -> "RankerModel":
        config, tensors, _ = read_checkpoint(path, kind="bilstm-ranker")
        cfg = RankerConfig(**config)
        module = BiLSTMScorer(cfg.input_dim, cfg.hidden_dim)
        module.load_state_dict({k: torch.from_numpy(v) for k, v in tensors.items()})
        return cls(cfg, module)


def train_ranker(
    train: Sequence[tuple[np.ndarray, np.ndarray]], config: RankerConfig
) -> tuple[RankerModel, list[float]]:
    """Fit on ``(embeddings, labels)`` pairs; returns the model and per-epoch mean loss."""
    if not train:
        raise EmptyTraining("no training admissions")
    for emb, labels in train:
        if emb.ndim != 2 or emb.shape[1] != config.input_dim:
            raise DimensionMismatch(f"embedding width {emb.shape[-1]} != model input {config.input_dim}")
        if len(labels) != len(emb):
            raise ValueError("one label per sentence required")
    torch.manual_seed(config.seed)
    model = RankerModel(config)
    module = model.module
    opt = torch.optim.Adam(module.parameters(), lr=config.lr)
    gen = torch.Generator().manual_seed(config.seed)
    history = []
    for epoch in range(config.epochs):
        module.train()
        order = torch.randperm(len(train), generator=gen).tolist()
        total, count = 0.0, 0
        for b in range(0, len(order), config.batch_size):
            items = [train[i] for i in order[b : b + config.batch_size]]
            x, lengths = _batch([e for e, _ in items])
            y = torch.zeros(x.shape[0], x.shape[1])
            mask = torch.zeros_like(y)
            for i, (_, lab) in enumerate(items):
                y[i, : len(lab)] = torch.from_numpy(np.asarray(lab, dtype=np.float32))
                mask[i, : len(lab)] = 1.0
            logits = module(x, lengths)
            loss = nn.functional.binary_cross_entropy_with_logits(logits, y, weight=mask, reduction="sum")
            loss = loss / mask.sum()
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(items)
            count += len(items)
        history.append(total / count)
        log.info("ranker epoch %d loss %.4f", epoch + 1, history[-1])
    module.eval()
    return model, history
