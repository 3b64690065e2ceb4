"""Metric oracles: accuracy position loop, BLEU hand computations
(brevity penalty, clipping, corpus-level aggregation), length buckets,
and the report dataclass contracts."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softbeam.errors import ContractViolation, DataError
from softbeam.metrics import (EvalReport, bleu, corpus_bleu_score, evaluate,
                              length_bucket_report, mean_hamming_rate,
                              sequence_accuracy)


# ---------------------------------------------------------------------------
# accuracy


def test_identical_sequences_score_one():
    assert sequence_accuracy([[3, 4, 5]], [[3, 4, 5]]) == 1.0


def test_one_of_three_positions_wrong():
    assert sequence_accuracy([[3, 4, 5]], [[3, 5, 5]]) == pytest.approx(2 / 3)


def test_accuracy_matches_position_loop_oracle():
    rng = np.random.default_rng(0)
    preds, golds = [], []
    for _ in range(100):
        n = int(rng.integers(1, 9))
        preds.append([int(v) for v in rng.integers(3, 8, n)])
        golds.append([int(v) for v in rng.integers(3, 8, n)])
    correct = sum(p == g for ps, gs in zip(preds, golds)
                  for p, g in zip(ps, gs))
    total = sum(len(g) for g in golds)
    assert sequence_accuracy(preds, golds) == pytest.approx(correct / total)


def test_tagging_mode_rejects_length_mismatch():
    with pytest.raises(ContractViolation, match="length"):
        sequence_accuracy([[3, 4]], [[3]], task_kind="tagging")


def test_transduction_mode_counts_length_mismatch_as_errors():
    # matched prefix of 2, denominator is the longer length 4
    assert sequence_accuracy([[3, 4]], [[3, 4, 5, 6]],
                             task_kind="transduction") == pytest.approx(0.5)
    assert sequence_accuracy([[3, 4, 5, 6]], [[3, 4]],
                             task_kind="transduction") == pytest.approx(0.5)


def test_accuracy_requires_paired_nonempty_corpora():
    with pytest.raises(ContractViolation, match="vs"):
        sequence_accuracy([[3]], [[3], [4]])
    with pytest.raises(DataError, match="empty"):
        sequence_accuracy([], [])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.integers(3, 9), min_size=1, max_size=6),
                min_size=1, max_size=5),
       st.integers(0, 2 ** 31 - 1))
def test_hamming_rate_is_exact_accuracy_complement(golds, seed):
    rng = np.random.default_rng(seed)
    preds = [[int(v) for v in rng.integers(3, 10, len(g))] for g in golds]
    acc = sequence_accuracy(preds, golds, task_kind="tagging")
    assert acc + mean_hamming_rate(preds, golds) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# BLEU


def test_exact_match_bleu_100():
    score, precisions, ratio = bleu([[3, 4, 5, 6, 7]], [[3, 4, 5, 6, 7]])
    assert score == pytest.approx(100.0)
    assert precisions == (100.0, 100.0, 100.0, 100.0)
    assert ratio == pytest.approx(1.0)


def test_brevity_penalty_hand_case():
    # pred "a b c d" vs ref "a b c d e": all precisions 100, c=4 < r=5,
    # so bleu = 100 * exp(1 - 5/4) = 77.8800783...
    score, precisions, ratio = bleu([[3, 4, 5, 6]], [[3, 4, 5, 6, 7]])
    assert precisions == (100.0, 100.0, 100.0, 100.0)
    assert ratio == pytest.approx(0.8)
    assert score == pytest.approx(100.0 * math.exp(1.0 - 5.0 / 4.0))
    assert abs(score - 77.88) < 0.01


def test_disjoint_tokens_score_zero_without_smoothing():
    score, precisions, _ = bleu([[3, 4, 5, 6]], [[7, 8, 9, 10]])
    assert score == 0.0
    assert precisions[0] == 0.0


def test_all_short_sequences_score_zero_without_smoothing():
    # no 4-grams anywhere: the 4-gram precision is zero by the
    # no-smoothing rule, so the corpus scores zero even on exact match
    score, precisions, _ = bleu([[3, 4, 5]], [[3, 4, 5]])
    assert score == 0.0
    assert precisions[3] == 0.0


def test_modified_precision_clips_repeated_ngrams():
    # pred has five copies of token 3 but the ref only licenses two
    _, precisions, _ = bleu([[3, 3, 3, 3, 3]], [[3, 3]])
    assert precisions[0] == pytest.approx(100.0 * 2 / 5)


def test_longer_prediction_takes_no_brevity_penalty():
    # pred "a b c d e f" vs ref "a b c d e": precisions 5/6, 4/5, 3/4, 2/3
    score, precisions, ratio = bleu([[3, 4, 5, 6, 7, 8]], [[3, 4, 5, 6, 7]])
    assert precisions == tuple(pytest.approx(100.0 * v)
                               for v in (5 / 6, 4 / 5, 3 / 4, 2 / 3))
    assert ratio == pytest.approx(6 / 5)
    expected = 100.0 * (5 / 6 * 4 / 5 * 3 / 4 * 2 / 3) ** 0.25
    assert score == pytest.approx(expected)


def test_bleu_aggregates_counts_over_the_corpus():
    # counts pool across examples before the ratio, unlike a mean of
    # per-sentence scores: the second pair contributes only unigrams
    preds = [[3, 4, 5, 6], [7]]
    refs = [[3, 4, 5, 6], [8]]
    _, precisions, ratio = bleu(preds, refs)
    assert precisions[0] == pytest.approx(100.0 * 4 / 5)
    assert precisions[1] == pytest.approx(100.0 * 3 / 3)
    assert precisions[3] == pytest.approx(100.0 * 1 / 1)
    assert ratio == pytest.approx(1.0)


def test_bleu_rejects_empty_or_unpaired_input():
    with pytest.raises(DataError, match="empty"):
        bleu([], [])
    with pytest.raises(ContractViolation, match="vs"):
        bleu([[3]], [[3], [4]])
    with pytest.raises(DataError, match="empty reference"):
        bleu([[]], [[]])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.integers(3, 12), min_size=4, max_size=10),
                min_size=1, max_size=6))
def test_bleu_of_corpus_against_itself_is_100(seqs):
    assert corpus_bleu_score(seqs, seqs) == pytest.approx(100.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.integers(3, 6), min_size=4, max_size=8),
                min_size=1, max_size=4),
       st.integers(0, 2 ** 31 - 1))
def test_bleu_stays_in_range(golds, seed):
    rng = np.random.default_rng(seed)
    preds = [[int(v) for v in rng.integers(3, 7, len(g))] for g in golds]
    score, precisions, _ = bleu(preds, golds)
    assert 0.0 <= score <= 100.0 + 1e-9
    assert all(0.0 <= p <= 100.0 for p in precisions)


# ---------------------------------------------------------------------------
# length buckets


def test_single_occupied_bucket_equals_corpus_metric():
    preds = [[3, 4, 5, 6], [3, 4, 5, 7]]
    refs = [[3, 4, 5, 6], [3, 4, 5, 6]]
    out = length_bucket_report(preds, refs, [5, 5],
                               buckets=((0, 4), (4, 8), (8, None)))
    assert list(out) == ["4-8"]
    assert out["4-8"] == pytest.approx(corpus_bleu_score(preds, refs))


def test_two_bucket_split_matches_hand_computation():
    preds = [[3, 4, 5, 6], [3, 4, 5, 6, 7], [9, 9, 9, 9]]
    refs = [[3, 4, 5, 6], [3, 4, 5, 6, 7], [3, 4, 5, 6]]
    out = length_bucket_report(preds, refs, [2, 6, 6],
                               buckets=((0, 4), (4, None)))
    assert out["0-4"] == pytest.approx(100.0)
    assert out["4+"] == pytest.approx(
        corpus_bleu_score(preds[1:], refs[1:]))


def test_empty_bucket_is_omitted_not_zero():
    out = length_bucket_report([[3, 4, 5, 6]], [[3, 4, 5, 6]], [2],
                               buckets=((0, 4), (4, None)))
    assert "4+" not in out


def test_bucket_report_validates_alignment():
    with pytest.raises(ContractViolation, match="src_lens"):
        length_bucket_report([[3]], [[3]], [1, 2])


# ---------------------------------------------------------------------------
# evaluation reports


def test_eval_report_validates_ranges_and_labels():
    good = dict(accuracy=0.5, bleu=50.0,
                ngram_precisions=(60.0, 50.0, 40.0, 30.0), length_ratio=1.0)
    EvalReport(**good, decode_mode="pretrain-beam")
    with pytest.raises(ContractViolation, match="decode mode"):
        EvalReport(**good, decode_mode="argmax")
    with pytest.raises(ContractViolation, match="bleu"):
        EvalReport(**{**good, "bleu": 101.0}, decode_mode="pretrain-beam")
    with pytest.raises(ContractViolation, match="precision"):
        EvalReport(**{**good, "ngram_precisions": (60.0, 50.0, 40.0, -1.0)},
                   decode_mode="pretrain-beam")


def test_eval_report_dict_round_trip():
    rep = EvalReport(accuracy=0.75, bleu=42.0,
                     ngram_precisions=(80.0, 60.0, 50.0, 30.0),
                     length_ratio=0.95, bucket_scores={"0-4": 40.0},
                     decode_mode="globally-normalized")
    assert EvalReport.from_dict(rep.to_dict()) == rep


def test_evaluate_builds_full_report():
    preds = [[3, 4, 5, 6], [3, 4, 5, 8]]
    golds = [[3, 4, 5, 6], [3, 4, 5, 6]]
    rep = evaluate(preds, golds, "tagging", "pretrain-greedy",
                   src_lens=[4, 4])
    assert rep.accuracy == pytest.approx(7 / 8)
    assert rep.decode_mode == "pretrain-greedy"
    # tagging buckets score accuracy, not BLEU
    assert rep.bucket_scores["4-6"] == pytest.approx(7 / 8)
