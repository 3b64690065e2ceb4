"""Warm-start objectives: teacher-forcing cross entropy and its
self-normalized variant, plus log-normalizer statistics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, DataError
from .model import (ModelParams, check_length_contract, forced_logits,
                    local_log_normalizer)


def teacher_forcing_nll(params: ModelParams, x: Sequence[int],
                        y: Sequence[int]) -> Tensor:
    """-sum_i log p(y_i | x, y_{1:i-1}) with the gold history fed back.

    Always log-softmax normalized regardless of the model's normalization
    flag: cross entropy is a local likelihood objective by definition.
    """
    check_length_contract(params, x, y)
    total = ad.zeros(())
    for tok, logits in zip(y, forced_logits(params, x, y)):
        log_p = ad.sub(logits, ad.logsumexp(logits))
        total = ad.add(total, ad.rows(log_p, tok))
    return ad.scalar_mul(total, -1.0)


def self_normalized_nll(params: ModelParams, x: Sequence[int],
                        y: Sequence[int], lam: float) -> Tensor:
    """Teacher-forcing NLL plus lam * sum_i (log Z_i)^2.

    Penalizing the squared per-step log-normalizer pushes log Z toward 0 so
    that the learned scores approximately lie on the probability simplex and
    can later be reused as unnormalized scores.  lam=0 reduces bit-exactly to
    `teacher_forcing_nll`.
    """
    if lam < 0:
        raise ConfigError(f"normalizer penalty weight must be >= 0, got {lam}")
    check_length_contract(params, x, y)
    total = ad.zeros(())
    penalty = ad.zeros(())
    for tok, logits in zip(y, forced_logits(params, x, y)):
        z = ad.logsumexp(logits)
        log_p = ad.sub(logits, z)
        total = ad.add(total, ad.rows(log_p, tok))
        if lam > 0:
            penalty = ad.add(penalty, ad.mul(z, z))
    loss = ad.scalar_mul(total, -1.0)
    if lam > 0:
        loss = ad.add(loss, ad.scalar_mul(penalty, lam))
    return loss


@dataclass
class LogZStats:
    mean: float
    variance: float      # population variance over decoding steps
    split_label: str
    count: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "variance": self.variance,
                "split": self.split_label, "count": self.count}


def logz_stats(params: ModelParams, examples: Sequence[tuple[Sequence[int], Sequence[int]]],
               split_label: str) -> LogZStats:
    """Mean and population variance of the per-step log-normalizer over every
    decoding step of every example, under gold-history teacher forcing."""
    if not examples:
        raise DataError(f"logz_stats: empty split {split_label!r}")
    values: list[float] = []
    for x, y in examples:
        for logits in forced_logits(params, x, y):
            values.append(local_log_normalizer(logits).item())
    arr = np.asarray(values)
    return LogZStats(mean=float(arr.mean()), variance=float(arr.var()),
                     split_label=split_label, count=len(values))
