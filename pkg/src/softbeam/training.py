"""Training loops: pre-training and search-aware fine-tuning.

Both loops follow the same protocol: several independent restarts, SGD (or
Adam) on minibatches with global-norm gradient clipping, a dev evaluation
after every epoch, and selection of the single checkpoint with the best dev
metric across all restarts and epochs.  Every epoch appends one
line-oriented log record so learning curves can be rendered later.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor, backward
from .beam import hard_beam_search, soft_beam_map_decode, soft_beam_objective
from .checkpoint import clone_params, with_mode
from .config import TrainConfig
from .data import Corpus, iter_batches
from .errors import ConfigError, ContractViolation
from .metrics import corpus_bleu_score, sequence_accuracy
from .model import ModelConfig, ModelParams, init_params
from .objectives import self_normalized_nll, teacher_forcing_nll

LogFn = Callable[[str], None]


def _noop_log(line: str) -> None:
    pass


def global_grad_norm(params: ModelParams) -> float:
    total = 0.0
    for t in params.tensors():
        if t.grad is not None:
            total += float(np.sum(t.grad * t.grad))
    return math.sqrt(total)


def clip_gradients(params: ModelParams, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm.
    Returns the pre-clip norm."""
    norm = global_grad_norm(params)
    if norm > max_norm:
        scale = max_norm / norm
        for t in params.tensors():
            if t.grad is not None:
                t.grad *= scale
    return norm


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: ModelParams) -> None:
        for t in params.tensors():
            if t.grad is not None:
                t.values -= self.lr * t.grad


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m: dict[int, np.ndarray] = {}
        self.v: dict[int, np.ndarray] = {}

    def step(self, params: ModelParams) -> None:
        self.t += 1
        for i, t in enumerate(params.tensors()):
            if t.grad is None:
                continue
            m = self.m.setdefault(i, np.zeros_like(t.values))
            v = self.v.setdefault(i, np.zeros_like(t.values))
            m += (1 - self.beta1) * (t.grad - m)
            v += (1 - self.beta2) * (t.grad * t.grad - v)
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            t.values -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == "adam":
        return Adam(cfg.learning_rate)
    return SGD(cfg.learning_rate)


@dataclass
class EpochRecord:
    restart: int
    epoch: int
    alpha: float | None
    train_loss: float
    dev_metric: float

    def line(self) -> str:
        alpha = "-" if self.alpha is None else f"{self.alpha:.6g}"
        return (f"restart={self.restart} epoch={self.epoch} alpha={alpha} "
                f"train_loss={self.train_loss:.6f} "
                f"dev_metric={self.dev_metric:.6f}")


@dataclass
class TrainResult:
    params: ModelParams
    records: list[EpochRecord] = field(default_factory=list)
    best_restart: int = 0
    best_epoch: int = 0
    best_dev: float = float("-inf")


def decode_corpus(params: ModelParams, corpus: Corpus,
                  mode: str = "beam", k: int = 1,
                  alpha: float = 1000.0,
                  score_mode: str | None = None) -> list[list[int]]:
    """Decode every source sequence.  `score_mode` overrides the model's
    own normalization when scoring steps: "normalized" forces per-step
    log-softmax, "unnormalized" forces raw logits."""
    override = {None: None, "normalized": "local",
                "unnormalized": "global"}.get(score_mode, "missing")
    if override == "missing":
        raise ContractViolation(f"unknown score mode {score_mode!r}")
    t_max = corpus.t_max
    preds = []
    for x, _ in corpus.examples:
        if mode == "greedy":
            out, _, _ = hard_beam_search(params, x, 1, t_max=t_max,
                                         mode=override)
        elif mode == "beam":
            out, _, _ = hard_beam_search(params, x, k, t_max=t_max,
                                         mode=override)
        elif mode == "soft-map":
            out = soft_beam_map_decode(params, x, k, alpha, t_max=t_max,
                                       mode=override)
        else:
            raise ContractViolation(f"unknown decode mode {mode!r}")
        preds.append(out)
    return preds


def dev_metric_value(params: ModelParams, dev: Corpus, cfg: TrainConfig,
                     decode_mode: str, alpha: float = 1000.0) -> float:
    preds = decode_corpus(params, dev, mode=decode_mode, k=cfg.beam_k,
                          alpha=alpha)
    golds = [y for _, y in dev.examples]
    if cfg.dev_metric == "bleu":
        return corpus_bleu_score(preds, golds)
    return sequence_accuracy(preds, golds, task_kind=cfg.task_kind)


def _example_objective(cfg: TrainConfig, params: ModelParams, x, y,
                       alpha: float | None, t_max: int | None) -> Tensor:
    if cfg.objective == "teacher-forcing":
        return teacher_forcing_nll(params, x, y)
    if cfg.objective == "self-normalized":
        return self_normalized_nll(params, x, y, cfg.lam)
    return soft_beam_objective(params, x, y, cfg.beam_k, alpha, t_max=t_max)


def _run_epochs(cfg: TrainConfig, params: ModelParams, train: Corpus,
                dev: Corpus, restart: int, result: TrainResult,
                log: LogFn, search_aware: bool) -> None:
    rng = np.random.default_rng(cfg.seed + 1000 * restart + 1)
    opt = make_optimizer(cfg)
    decode_mode = "soft-map" if search_aware else "greedy"
    # dev decoding always happens at the final epoch's inverse temperature:
    # that is the regime the selected checkpoint will be decoded in
    dev_alpha = cfg.anneal.alpha(cfg.epochs - 1)
    for epoch in range(cfg.epochs):
        alpha = cfg.anneal.alpha(epoch) if search_aware else None
        total_loss = 0.0
        for batch in iter_batches(train.examples, cfg.batch_size, rng):
            with Tape() as tape:
                losses = [_example_objective(cfg, params, x, y, alpha,
                                             train.t_max)
                          for x, y in batch]
                loss = ad.scalar_mul(ad.reduce_sum(ad.stack(losses)),
                                     1.0 / len(losses))
                backward(loss, tape)
            total_loss += loss.item() * len(losses)
            clip_gradients(params, cfg.clip_norm)
            opt.step(params)
            for t in params.tensors():
                t.zero_grad()
        dev_value = dev_metric_value(params, dev, cfg, decode_mode,
                                     alpha=dev_alpha)
        rec = EpochRecord(restart, epoch, alpha,
                          total_loss / len(train.examples), dev_value)
        result.records.append(rec)
        log(rec.line())
        if dev_value > result.best_dev:
            result.best_dev = dev_value
            result.best_restart = restart
            result.best_epoch = epoch
            result.params = clone_params(params)


def run_pretrain(cfg: TrainConfig, train: Corpus, dev: Corpus,
                 log: LogFn = _noop_log) -> TrainResult:
    if cfg.objective not in ("teacher-forcing", "self-normalized"):
        raise ConfigError(
            f"pre-training objective must be teacher-forcing or "
            f"self-normalized, got {cfg.objective!r}")
    result = TrainResult(params=None)
    for restart in range(cfg.restarts):
        params = init_params(_model_config(cfg, train), cfg.seed + restart)
        _run_epochs(cfg, params, train, dev, restart, result, log,
                    search_aware=False)
    log(f"selected restart={result.best_restart} "
        f"epoch={result.best_epoch} dev_metric={result.best_dev:.6f}")
    return result


def run_search_aware(cfg: TrainConfig, train: Corpus, dev: Corpus,
                     warm: ModelParams, log: LogFn = _noop_log
                     ) -> TrainResult:
    if cfg.objective != "soft-beam":
        raise ConfigError("search-aware training requires objective = "
                          "soft-beam")
    warning = cfg.warm_start_warning()
    if warning:
        log(warning)
    warm = with_mode(warm, cfg.normalization_mode)
    result = TrainResult(params=None)
    # the warm start itself is the first selection candidate, evaluated
    # under the same dev metric the epochs use: if no epoch improves on
    # it, training hands back the warm start rather than a worse model
    dev_alpha = cfg.anneal.alpha(cfg.epochs - 1)
    base = dev_metric_value(warm, dev, cfg, "soft-map", alpha=dev_alpha)
    log(f"warm-start dev_metric={base:.6f}")
    result.best_dev = base
    result.best_restart = -1
    result.best_epoch = -1
    result.params = clone_params(warm)
    for restart in range(cfg.restarts):
        params = clone_params(warm)
        _run_epochs(cfg, params, train, dev, restart, result, log,
                    search_aware=True)
    log(f"selected restart={result.best_restart} "
        f"epoch={result.best_epoch} dev_metric={result.best_dev:.6f}")
    return result


def _model_config(cfg: TrainConfig, corpus: Corpus) -> ModelConfig:
    return ModelConfig(
        src_vocab=len(corpus.src_vocab), tgt_vocab=len(corpus.tgt_vocab),
        embed_dim=cfg.embed_dim, hidden_dim=cfg.hidden_dim,
        encoder_mode=cfg.encoder_mode, attention_mode=cfg.attention_mode,
        normalization_mode=cfg.normalization_mode)
