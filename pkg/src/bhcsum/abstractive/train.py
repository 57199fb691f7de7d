"""Teacher-forced training with per-epoch validation and best-checkpoint retention."""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import torch
from torch import nn

from ..errors import ConfigError, EmptyTraining, TrainingDivergence
from ..evaluation.rouge import rouge_lsum
from ..seeding import derive_seed
from ..tokenizer import BPETokenizer
from .data import TrainingExample
from .generate import GREEDY, decode_batch
from .model import ModelConfig, Seq2Seq

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 8
    lr: float = 1e-3
    weight_decay: float = 0.01
    warmup_steps: int = 50
    grad_clip: float = 1.0
    select_by: str = "val_rouge_lsum"
    val_decode_max_len: int | None = None

    def __post_init__(self):
        if self.select_by not in ("val_rouge_lsum", "val_loss"):
            raise ConfigError("select_by must be val_rouge_lsum or val_loss")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")


@dataclass
class TrainState:
    step: int = 0
    epoch: int = 0
    best_epoch: int = 0
    best_validation_metric: float = float("nan")
    history: list[dict] = field(default_factory=list)


def _pad(rows: Sequence[Sequence[int]], pad: int) -> torch.Tensor:
    width = max(len(r) for r in rows)
    return torch.tensor([list(r) + [pad] * (width - len(r)) for r in rows], dtype=torch.long)


def make_batch(examples: Sequence[TrainingExample], cfg: ModelConfig):
    src = _pad([e.source for e in examples], cfg.pad_id)
    guide = _pad([e.guidance for e in examples], cfg.pad_id) if cfg.guided else None
    tgt = _pad([e.target for e in examples], cfg.pad_id)
    return src, guide, tgt[:, :-1], tgt[:, 1:]


def batch_loss(model: Seq2Seq, examples: Sequence[TrainingExample]) -> tuple[torch.Tensor, int]:
    """Summed token cross-entropy and the number of target tokens."""
    src, guide, tin, tout = make_batch(examples, model.config)
    logits = model(src, tin, guide)
    loss = nn.functional.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), tout.reshape(-1), ignore_index=model.config.pad_id, reduction="sum"
    )
    return loss, int(tout.ne(model.config.pad_id).sum())


@torch.no_grad()
def evaluate_loss(model: Seq2Seq, examples: Sequence[TrainingExample], batch_size: int = 8) -> float:
    model.eval()
    total, count = 0.0, 0
    for b in range(0, len(examples), batch_size):
        loss, n = batch_loss(model, examples[b : b + batch_size])
        total += float(loss)
        count += n
    return total / max(count, 1)


def validation_rouge(model, examples, tokenizer, max_len=None) -> float:
    outputs = decode_batch(model, examples, tokenizer, GREEDY, max_len)
    refs = [tokenizer.decode(e.target) for e in examples]
    return sum(rouge_lsum(o, r).f1 for o, r in zip(outputs, refs)) / len(examples)


def _check_examples(examples, cfg: ModelConfig, name: str):
    for e in examples:
        if (e.guidance is not None) != cfg.guided:
            raise ConfigError(f"{name} example {e.admission_id}: guidance presence does not match model")
        if e.target[:1] != [cfg.bos_id]:
            raise ValueError(f"{name} example {e.admission_id}: target must start with BOS")
        if len(e.source) > cfg.max_src_len or len(e.target) - 1 > cfg.max_tgt_len:
            raise ValueError(f"{name} example {e.admission_id}: exceeds model length limits")


def train(
    config: ModelConfig,
    train_set: Sequence[TrainingExample],
    val_set: Sequence[TrainingExample],
    tokenizer: BPETokenizer,
    train_config: TrainConfig = TrainConfig(),
    log_path: str | Path | None = None,
) -> tuple[Seq2Seq, TrainState]:
    """Train from the seeded initialisation; returns the best-by-validation model."""
    if not train_set:
        raise EmptyTraining("no training examples")
    if not val_set:
        raise EmptyTraining("no validation examples")
    _check_examples(train_set, config, "training")
    _check_examples(val_set, config, "validation")
    tc = train_config
    model = Seq2Seq(config)
    state = TrainState()
    if tc.epochs == 0:
        return model, state

    opt = torch.optim.AdamW(model.parameters(), lr=tc.lr, weight_decay=tc.weight_decay)
    sched = torch.optim.lr_scheduler.LambdaLR(opt, lambda s: min(1.0, (s + 1) / max(1, tc.warmup_steps)))
    gen = torch.Generator().manual_seed(derive_seed(config.seed, "batch-order"))
    higher_is_better = tc.select_by == "val_rouge_lsum"
    best_state = None
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(1, tc.epochs + 1):
            model.train()
            order = torch.randperm(len(train_set), generator=gen).tolist()
            total, count = 0.0, 0
            for b in range(0, len(order), tc.batch_size):
                batch = [train_set[i] for i in order[b : b + tc.batch_size]]
                loss, n = batch_loss(model, batch)
                mean = loss / max(n, 1)
                if not torch.isfinite(mean):
                    raise TrainingDivergence(f"training loss became {float(mean)} at epoch {epoch}, step {state.step}")
                opt.zero_grad()
                mean.backward()
                if tc.grad_clip:
                    nn.utils.clip_grad_norm_(model.parameters(), tc.grad_clip)
                opt.step()
                sched.step()
                state.step += 1
                total += float(loss.detach())
                count += n
            val_loss = evaluate_loss(model, val_set, tc.batch_size)
            if math.isnan(val_loss):
                raise TrainingDivergence(f"validation loss is NaN after epoch {epoch} (step {state.step})")
            val_rouge = validation_rouge(model, val_set, tokenizer, tc.val_decode_max_len)
            record = {
                "epoch": epoch,
                "train_loss": total / max(count, 1),
                "val_loss": val_loss,
                "val_rouge_lsum": val_rouge,
            }
            state.history.append(record)
            state.epoch = epoch
            log.info("epoch %d train %.4f val %.4f rougeLsum %.4f", epoch, record["train_loss"], val_loss, val_rouge)
            if log_fh:
                log_fh.write(json.dumps(record, sort_keys=True) + "\n")
            metric = record[tc.select_by]
            better = (
                best_state is None
                or (metric > state.best_validation_metric if higher_is_better else metric < state.best_validation_metric)
            )
            if better:
                state.best_validation_metric = metric
                state.best_epoch = epoch
                best_state = copy.deepcopy(model.state_dict())
    finally:
        if log_fh:
            log_fh.close()
    model.load_state_dict(best_state)
    model.eval()
    return model, state


def state_meta(state: TrainState) -> dict:
    return asdict(state)
