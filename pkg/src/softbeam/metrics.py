"""Evaluation metrics: token accuracy, corpus BLEU, length-bucket scores.

All metrics are pure functions of (predictions, references).  BLEU is the
plain corpus-level formulation: modified (clipped) 1..4-gram precisions
aggregated over the corpus, geometric mean, multiplicative brevity penalty
exp(1 - r/c) when the candidate corpus is shorter than the reference.  No
smoothing: if any n-gram precision is zero the score is zero.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import ContractViolation, DataError

DECODE_MODE_LABELS = ("pretrain-greedy", "pretrain-beam",
                      "locally-normalized", "globally-normalized")

Seqs = Sequence[Sequence[int]]


def _check_paired(preds: Seqs, golds: Seqs) -> None:
    if len(preds) != len(golds):
        raise ContractViolation(
            f"{len(preds)} predictions vs {len(golds)} references")
    if not preds:
        raise DataError("empty prediction corpus")


def sequence_accuracy(preds: Seqs, golds: Seqs,
                      task_kind: str = "tagging") -> float:
    """Fraction of token positions where prediction equals gold.

    Tagging requires per-example length equality.  Transduction pairs may
    differ in length: positions are compared up to the shorter sequence and
    the denominator is the longer one, so both over- and under-generation
    count as errors.
    """
    _check_paired(preds, golds)
    correct = total = 0
    for i, (p, g) in enumerate(zip(preds, golds)):
        if task_kind == "tagging" and len(p) != len(g):
            raise ContractViolation(
                f"example {i}: tagging prediction length {len(p)} != "
                f"gold length {len(g)}")
        correct += sum(a == b for a, b in zip(p, g))
        total += max(len(p), len(g))
    return correct / total if total else 1.0


def mean_hamming_rate(preds: Seqs, golds: Seqs) -> float:
    """Token-level mismatch rate; the exact complement of tagging accuracy."""
    return 1.0 - sequence_accuracy(preds, golds, task_kind="tagging")


def _ngrams(seq: Sequence[int], n: int) -> Counter:
    return Counter(tuple(seq[i:i + n]) for i in range(len(seq) - n + 1))


def bleu(preds: Seqs, refs: Seqs) -> tuple[float, tuple[float, ...], float]:
    """Corpus BLEU in [0, 100].

    Returns (bleu, (p1, p2, p3, p4) in percent, length_ratio) where
    length_ratio = total prediction length / total reference length.
    """
    _check_paired(preds, refs)
    matched = [0] * 4
    possible = [0] * 4
    c_len = r_len = 0
    for p, r in zip(preds, refs):
        c_len += len(p)
        r_len += len(r)
        for n in range(1, 5):
            pg = _ngrams(p, n)
            if not pg:
                continue
            rg = _ngrams(r, n)
            matched[n - 1] += sum(min(cnt, rg[g]) for g, cnt in pg.items())
            possible[n - 1] += sum(pg.values())
    if r_len == 0:
        raise DataError("empty reference corpus")

    precisions = tuple(
        100.0 * m / d if d else 0.0 for m, d in zip(matched, possible))
    ratio = c_len / r_len
    if any(p == 0.0 for p in precisions) or c_len == 0:
        return 0.0, precisions, ratio
    log_mean = sum(math.log(p / 100.0) for p in precisions) / 4.0
    bp = 1.0 if c_len >= r_len else math.exp(1.0 - r_len / c_len)
    return 100.0 * bp * math.exp(log_mean), precisions, ratio


def corpus_bleu_score(preds: Seqs, refs: Seqs) -> float:
    return bleu(preds, refs)[0]


def bucket_label(lo: int, hi: int | None) -> str:
    return f"{lo}-{hi}" if hi is not None else f"{lo}+"


DEFAULT_BUCKETS = ((0, 4), (4, 6), (6, 8), (8, None))


def length_bucket_report(preds: Seqs, refs: Seqs, src_lens: Sequence[int],
                         buckets: Sequence[tuple[int, int | None]]
                         = DEFAULT_BUCKETS,
                         metric_fn: Callable[[Seqs, Seqs], float]
                         = corpus_bleu_score) -> dict[str, float]:
    """Metric per source-length bucket [lo, hi); a bucket with no examples
    is left out of the report rather than scored zero."""
    _check_paired(preds, refs)
    if len(src_lens) != len(preds):
        raise ContractViolation("src_lens must align with predictions")
    out: dict[str, float] = {}
    for lo, hi in buckets:
        idx = [i for i, n in enumerate(src_lens)
               if lo <= n and (hi is None or n < hi)]
        if not idx:
            continue
        out[bucket_label(lo, hi)] = metric_fn(
            [preds[i] for i in idx], [refs[i] for i in idx])
    return out


@dataclass
class EvalReport:
    """One decode run's evaluation surface."""
    accuracy: float
    bleu: float
    ngram_precisions: tuple[float, float, float, float]
    length_ratio: float
    bucket_scores: dict[str, float] = field(default_factory=dict)
    decode_mode: str = "pretrain-greedy"

    def __post_init__(self):
        if self.decode_mode not in DECODE_MODE_LABELS:
            raise ContractViolation(
                f"unknown decode mode label {self.decode_mode!r}")
        if not 0.0 <= self.bleu <= 100.0:
            raise ContractViolation(f"bleu {self.bleu} outside [0, 100]")
        for p in self.ngram_precisions:
            if not 0.0 <= p <= 100.0:
                raise ContractViolation(
                    f"n-gram precision {p} outside [0, 100]")

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "bleu": self.bleu,
            "ngram_precisions": list(self.ngram_precisions),
            "length_ratio": self.length_ratio,
            "bucket_scores": dict(self.bucket_scores),
            "decode_mode": self.decode_mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(accuracy=d["accuracy"], bleu=d["bleu"],
                   ngram_precisions=tuple(d["ngram_precisions"]),
                   length_ratio=d["length_ratio"],
                   bucket_scores=dict(d.get("bucket_scores", {})),
                   decode_mode=d["decode_mode"])


def evaluate(preds: Seqs, golds: Seqs, task_kind: str, decode_mode: str,
             src_lens: Sequence[int] | None = None) -> EvalReport:
    """Full report: accuracy always, BLEU surfaces for transduction (for
    tagging the BLEU fields are computed too, on the tag sequences)."""
    acc = sequence_accuracy(preds, golds, task_kind)
    b, precs, ratio = bleu(preds, golds)
    buckets = {}
    if src_lens is not None:
        fn = corpus_bleu_score if task_kind == "transduction" else (
            lambda p, g: sequence_accuracy(p, g, task_kind))
        buckets = length_bucket_report(preds, golds, src_lens,
                                       metric_fn=fn)
    return EvalReport(accuracy=acc, bleu=b, ngram_precisions=precs,
                      length_ratio=ratio, bucket_scores=buckets,
                      decode_mode=decode_mode)
