"""Randomized diagnostic suites shared by the CLI and the tests.

The gradient suite draws small random models and inputs, then compares
analytic gradients of every training objective against central finite
differences.  The decode-agreement suite compares soft-beam MAP decoding
at a large inverse temperature with hard beam search on random instances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import GradCheckReport, constant, grad_check, rows
from .beam import (BeamState, MSchedule, _advance_slots, exact_top_k,
                   hamming_cost, hard_beam_search, init_beam,
                   soft_beam_map_decode, soft_beam_objective)
from .errors import ConfigError
from .model import EOS, ModelConfig, ModelParams, encode, init_params
from .objectives import self_normalized_nll, teacher_forcing_nll

GRADCHECK_OBJECTIVES = ("teacher-forcing", "self-normalized",
                        "soft-beam-local", "soft-beam-global")


def random_instance(rng: np.random.Generator, attention: str = "fixed",
                    normalization: str = "local",
                    encoder: str = "unidirectional",
                    max_dim: int = 4, max_vocab: int = 8,
                    max_len: int = 5,
                    init_scale: float = 0.1) -> tuple[ModelParams, list[int],
                                                      list[int]]:
    """A small random model with a random example.

    Fixed attention pairs with a gold of equal length; content attention
    pairs with a shorter gold ending in EOS.  A larger `init_scale` spreads
    the candidate scores apart, which the decode-agreement suites use to
    keep clear of ties.
    """
    cfg = ModelConfig(
        src_vocab=int(rng.integers(4, max_vocab + 1)),
        tgt_vocab=int(rng.integers(4, max_vocab + 1)),
        embed_dim=int(rng.integers(2, max_dim + 1)),
        hidden_dim=int(rng.integers(2, max_dim + 1)),
        encoder_mode=encoder, attention_mode=attention,
        normalization_mode=normalization)
    params = init_params(cfg, seed=int(rng.integers(0, 2 ** 31)),
                         scale=init_scale)
    n = int(rng.integers(2, max_len + 1))
    x = [int(v) for v in rng.integers(3, cfg.src_vocab, n)]
    if attention == "fixed":
        y = [int(v) for v in rng.integers(3, cfg.tgt_vocab, n)]
    else:
        m = int(rng.integers(1, n + 1))
        y = [int(v) for v in rng.integers(3, cfg.tgt_vocab, m)] + [EOS]
    return params, x, y


def _objective_closure(name: str, params: ModelParams, x: list[int],
                       y: list[int], k: int, alpha: float,
                       t_max: int | None):
    if name == "teacher-forcing":
        return lambda: teacher_forcing_nll(params, x, y)
    if name == "self-normalized":
        return lambda: self_normalized_nll(params, x, y, lam=0.1)
    if name in ("soft-beam-local", "soft-beam-global"):
        # pin the gradient-stopped top-k constants at the base point so
        # finite differences probe the same function the tape differentiates
        schedule = MSchedule(record=True)
        soft_beam_objective(params, x, y, k, alpha, t_max=t_max,
                            schedule=schedule)
        schedule.record = False
        return lambda: soft_beam_objective(params, x, y, k, alpha,
                                           t_max=t_max, schedule=schedule)
    raise ConfigError(f"unknown gradcheck objective {name!r}")


@dataclass
class SuiteResult:
    objective: str
    instances: int
    max_rel_error: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"gradcheck objective={self.objective} "
                f"instances={self.instances} "
                f"max_rel_error={self.max_rel_error:.3e} {status}")


def run_gradcheck_suite(objectives: Sequence[str] = GRADCHECK_OBJECTIVES,
                        instances: int = 20, seed: int = 0,
                        epsilon: float = 1e-5, rel_tol: float = 1e-4,
                        max_coords: int = 4,
                        alpha: float = 2.0) -> list[SuiteResult]:
    """Finite-difference checks for each objective on `instances` random
    small instances; a moderate alpha keeps soft-beam weights away from
    hard saturation where finite differences straddle selection switches.
    """
    results = []
    for name in objectives:
        rng = np.random.default_rng(seed + hash(name) % 1000)
        worst = 0.0
        passed = True
        for i in range(instances):
            if name.startswith("soft-beam"):
                attention = "fixed" if i % 2 == 0 else "content"
                normalization = name.rsplit("-", 1)[1]
            else:
                attention = "fixed" if i % 3 else "content"
                normalization = "local"
            encoder = "bidirectional" if i % 4 == 3 else "unidirectional"
            params, x, y = random_instance(rng, attention, normalization,
                                           encoder)
            k = int(rng.integers(1, 4))
            t_max = len(y) + 2 if attention == "content" else None
            f = _objective_closure(name, params, x, y, k, alpha, t_max)
            report = grad_check(f, params.tensors(), epsilon=epsilon,
                                rel_tol=rel_tol, max_coords=max_coords,
                                seed=seed + i)
            worst = max(worst, report.max_rel_error)
            passed = passed and report.passed
        results.append(SuiteResult(name, instances, worst, passed))
    return results


@dataclass
class AgreementResult:
    instances: int
    agreed: int
    max_objective_gap: float

    @property
    def rate(self) -> float:
        return self.agreed / self.instances


def run_decode_agreement(instances: int = 200, alpha: float = 1e4,
                         seed: int = 0,
                         score_margin: float = 0.05) -> AgreementResult:
    """Soft-beam MAP decode vs. hard beam search at large alpha, on random
    fixed-length instances (the regime where the two dynamics share one
    length contract; variable-length hard decoding terminates at EOS while
    the soft dynamics run a fixed step budget, a documented divergence).

    Instances whose beam transitions involve near-ties (top-(K+1) candidate
    scores closer than `score_margin` at any step) are re-drawn: the hard
    and soft selections legitimately differ at ties.  On agreeing instances
    the relaxed objective is compared against the hard beam output's
    Hamming loss.
    """
    rng = np.random.default_rng(seed)
    agreed = 0
    max_gap = 0.0
    done = 0
    while done < instances:
        normalization = "local" if done % 2 == 0 else "global"
        params, x, y = random_instance(rng, "fixed", normalization,
                                       max_len=6, init_scale=1.0)
        k = int(rng.integers(2, 4))
        if _has_near_tie(params, x, k, score_margin):
            continue
        done += 1
        hard_tokens, _, _ = hard_beam_search(params, x, k)
        soft_tokens = soft_beam_map_decode(params, x, k, alpha)
        if hard_tokens == soft_tokens:
            agreed += 1
            j_soft = soft_beam_objective(params, x, y, k, alpha).item()
            j_hard = float(sum(hamming_cost(v, g)
                               for v, g in zip(hard_tokens, y)))
            max_gap = max(max_gap, abs(j_soft - j_hard))
    return AgreementResult(instances, agreed, max_gap)


def _has_near_tie(params: ModelParams, x: list[int], k: int,
                  margin: float) -> bool:
    """Replay the hard beam transitions (fixed-length) and flag any step
    where consecutive top-(K+1) candidate scores come within `margin`, or
    the final winner is nearly tied."""
    ann = encode(params, x)
    vocab = params.config.tgt_vocab
    beam = init_beam(params, ann, k)
    for _ in range(len(x)):
        hiddens, cells, c_matrix = _advance_slots(params, beam, ann)
        flat = c_matrix.values.ravel()
        vals, idx = exact_top_k(flat, min(k + 1, flat.size))
        if np.any(np.abs(np.diff(vals)) < margin):
            return True
        new = BeamState([], [], [], [], [],
                        step_index=beam.step_index + 1)
        for j in range(k):
            b, v = divmod(int(idx[j]), vocab)
            new.hidden.append(hiddens[b])
            new.cell.append(cells[b])
            new.embed.append(rows(params.tgt_embed, v))
            new.scores.append(constant(float(vals[j])))
            new.losses.append(constant(0.0))
        beam = new
    final = np.sort([s.item() for s in beam.scores])[::-1]
    return bool(final.size > 1 and abs(final[0] - final[1]) < margin)


# ---------------------------------------------------------------------------
# search-induced label bias, hand-built
# ---------------------------------------------------------------------------
#
# A two-step, two-token decoding problem where the first step puts a "bad"
# hypothesis ahead of the "good" one by a chosen advantage.  The hand-built
# model's second-step scores depend only on which token the slot consumed:
# successors of the bad slot all score very low, successors of the good
# slot all score very high.  Under raw (global) scoring the beam therefore
# drops the bad prefix entirely.  Under per-step normalization the same
# weights are inert: each slot's scores are renormalized to sum to one, so
# the bad slot keeps its advantage no matter how the logits are chosen.
#
# GOOD_TOKEN and BAD_TOKEN are the two live vocabulary ids; the reserved
# ids are pinned far below every candidate.


GOOD_TOKEN, BAD_TOKEN = 3, 4

_SINK = -50.0          # reserved-token logit, keeps ids 0..2 out of beams
_SWING = 40.0          # output weight: step-2 score swing per unit hidden


def build_suppression_params(advantage: float) -> ModelParams:
    """Hand-built global-mode model for the two-step construction.

    Step 1 (decoder state still empty): logits come from the output bias
    alone, scoring BAD_TOKEN `advantage` above GOOD_TOKEN.  Step 2: the
    decoder LSTM passes the consumed embedding (+1 for good, -1 for bad)
    through gates pinned open, so the hidden state is +/- t and the
    output weight swings every successor score by +/- _SWING * t.
    """
    if advantage <= 0:
        raise ConfigError(
            f"the bad slot's advantage must be positive, got {advantage}")
    cfg = ModelConfig(src_vocab=5, tgt_vocab=5, embed_dim=1, hidden_dim=1,
                      encoder_mode="unidirectional", attention_mode="fixed",
                      normalization_mode="global")
    p = init_params(cfg, seed=0, scale=0.0)
    p.tgt_embed.values[GOOD_TOKEN, 0] = 1.0
    p.tgt_embed.values[BAD_TOKEN, 0] = -1.0
    # input gate and output gate pinned open, forget gate pinned shut,
    # candidate cell reads only the embedding half of the input
    p.dec.bi.values[:] = 10.0
    p.dec.bo.values[:] = 10.0
    p.dec.bf.values[:] = -10.0
    p.dec.wxc.values[0, 0] = 3.0
    p.out_w.values[GOOD_TOKEN, 0] = _SWING
    p.out_w.values[BAD_TOKEN, 0] = _SWING
    p.out_b.values[:3] = _SINK
    p.out_b.values[GOOD_TOKEN] = 0.0
    p.out_b.values[BAD_TOKEN] = advantage
    return p


@dataclass
class SuppressionOutcome:
    """Beam contents of the two-step construction under one scoring mode."""
    mode: str
    first_beam: list[int]          # step-1 slot labels, best first
    final_slots: list[tuple[int, ...]]
    final_scores: list[float]

    @property
    def bad_slot_led(self) -> bool:
        return self.first_beam[0] == BAD_TOKEN

    @property
    def bad_prefix_suppressed(self) -> bool:
        return all(slot[0] == GOOD_TOKEN for slot in self.final_slots)


def run_suppression_demo(advantage: float, mode: str = "global",
                         k: int = 2) -> SuppressionOutcome:
    """Decode the construction with a K-slot beam under `mode` scoring."""
    params = build_suppression_params(advantage)
    x = [3, 3]
    _, _, step1 = hard_beam_search(params, x[:1], k, mode=mode)
    _, _, slots = hard_beam_search(params, x, k, mode=mode)
    return SuppressionOutcome(
        mode=mode,
        first_beam=[h.tokens[0] for h in step1],
        final_slots=[h.tokens for h in slots],
        final_scores=[h.score for h in slots])


@dataclass
class GridOutcome:
    """Exhaustive scan over local-mode step-2 score assignments.

    With per-step normalization each slot's two scores are the
    log-softmax of its logits, so modulo the per-slot shift the whole
    assignment space is the grid of logit differences (one per slot).
    """
    advantage: float
    grid_points: int
    full_suppression_possible: bool   # both good successors above both bad
    top1_rescue_possible: bool        # best good successor above best bad


def local_logit_grid_search(advantage: float, grid_points: int = 2001,
                            span: float = 12.0) -> GridOutcome:
    """Scan every local-mode assignment of the construction's second step
    (K=2 slots, 2 live tokens) on a logit-difference grid in
    [-span, span]."""
    if advantage <= 0:
        raise ConfigError(
            f"the bad slot's advantage must be positive, got {advantage}")
    d = np.linspace(-span, span, grid_points)
    # per-slot log-softmax pair for logits (d, 0): (a_hi, a_lo)
    hi = -np.log1p(np.exp(-np.abs(d)))          # log p of the larger logit
    lo = -np.log1p(np.exp(np.abs(d)))           # log p of the smaller one
    good_min = 0.0 + lo                          # good slot score is 0
    good_max = 0.0 + hi
    bad_max = advantage + hi
    # full suppression: the good slot's worse successor still beats the
    # bad slot's better successor, for some pair of assignments
    full = bool(np.max(good_min) > np.min(bad_max))
    top1 = bool(np.max(good_max) > np.min(bad_max))
    return GridOutcome(advantage=advantage, grid_points=grid_points,
                       full_suppression_possible=full,
                       top1_rescue_possible=top1)


def run_alpha_convergence(instances: int = 50, seed: int = 0,
                          alphas: Sequence[float] = (1.0, 10.0, 100.0, 1e4),
                          score_margin: float = 0.1) -> float:
    """Fraction of tie-free random instances where |J_soft(alpha) - J_hard|
    is non-increasing across the alpha ladder.

    The margin must be generous relative to the smallest alpha rung: near
    ties keep low-alpha mixtures far from the hard limit, which is exactly
    the regime pointwise convergence excludes.
    """
    rng = np.random.default_rng(seed)
    monotone = 0
    done = 0
    while done < instances:
        normalization = "local" if done % 2 == 0 else "global"
        params, x, y = random_instance(rng, "fixed", normalization,
                                       max_len=5, init_scale=1.5)
        k = int(rng.integers(2, 4))
        if _has_near_tie(params, x, k, score_margin):
            continue
        done += 1
        hard_tokens, _, _ = hard_beam_search(params, x, k)
        j_hard = float(sum(hamming_cost(v, g)
                           for v, g in zip(hard_tokens, y)))
        gaps = [abs(soft_beam_objective(params, x, y, k, a).item() - j_hard)
                for a in alphas]
        if all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:])):
            monotone += 1
    return monotone / instances
