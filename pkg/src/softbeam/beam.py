"""Beam search and its continuous relaxation.

Hard beam search keeps the K best-scoring partial hypotheses per step, which
makes a task loss on its output piecewise constant in the parameters.  The
relaxation replaces the discrete k-argmax selection with `soft_k_argmax`: a
temperature softmax over negative squared distances between all K*|V|
candidate scores and the exact k-th best score m_k.  Each new slot k is then
a convex combination of candidates under its peaked weight matrix W(k):

    score'_k = sum_{b,v} W(k)[b,v] * C[b,v]
    loss'_k  = sum_b rowsum(W(k))[b] * loss_b + sum_v colsum(W(k))[v] * cost(v)
    state'_k = sum_b rowsum(W(k))[b] * state_b        (soft backpointers)
    embed'_k = sum_v colsum(W(k))[v] * E[v]           (soft candidate vector)

The LSTM advances from the mixed state and embedding at the next step, so
the whole unrolled procedure is one differentiable graph; as the inverse
temperature alpha grows, every quantity converges to its hard beam-search
counterpart.  m_k itself is treated as a constant: the relaxation
differentiates through the distance computation, not through the top-k
extraction.

The beam is always full: initialization replicates the BOS state into all K
slots with slot 0 at score 0 and the rest at -1e9, so duplicates never win
selection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ContractViolation
from .model import (BOS, EOS, PAD, Annotations, DecoderState, ModelParams,
                    decoder_step, encode, init_decoder, step_log_scores)

SCORE_FILL = -1e9   # cumulative score of the duplicate initial slots


@dataclass
class AnnealSchedule:
    """Inverse-temperature schedule: alpha(epoch) = min(a0 * g^epoch, cap)."""
    alpha0: float = 1.0
    growth: float = 2.0
    alpha_max: float = 1000.0

    def __post_init__(self):
        if self.alpha0 <= 0:
            raise ConfigError(f"alpha0 must be > 0, got {self.alpha0}")
        if self.growth < 1:
            raise ConfigError(f"alpha growth must be >= 1, got {self.growth}")
        if self.alpha_max < self.alpha0:
            raise ConfigError("alpha_max must be >= alpha0")

    def alpha(self, epoch: int) -> float:
        return float(min(self.alpha0 * self.growth ** epoch, self.alpha_max))


@dataclass
class BeamState:
    """All per-slot quantities of the relaxed beam at one decoding step.

    hidden/cell/embed are the soft inputs the LSTM will advance from at the
    next step; scores are cumulative log-scores, losses cumulative soft
    Hamming costs.
    """
    hidden: list[Tensor]          # K x (h,)
    cell: list[Tensor]            # K x (h,)
    embed: list[Tensor]           # K x (d,)  next-input embeddings
    scores: list[Tensor]          # K scalars
    losses: list[Tensor]          # K scalars
    step_index: int = 0

    @property
    def k(self) -> int:
        return len(self.scores)


def hamming_cost(v: int, gold: int) -> float:
    """0/1 token mismatch cost.  On PAD-extended positions past the gold EOS
    both PAD and EOS count as correct continuations."""
    if gold == PAD:
        return 0.0 if v in (PAD, EOS) else 1.0
    return 0.0 if v == gold else 1.0


def hamming_cost_vector(vocab: int, gold: int) -> Tensor:
    """Constant |V|-vector of hamming_cost(v, gold) for all v."""
    if gold == PAD:
        c = np.ones(vocab)
        c[PAD] = 0.0
        c[EOS] = 0.0
        return ad.constant(c)
    m = ad.mismatch_mask(vocab, gold)
    return m


def init_beam(params: ModelParams, ann: Annotations, k: int) -> BeamState:
    if k < 1:
        raise ContractViolation(f"beam size must be >= 1, got {k}")
    state = init_decoder(params, ann)
    bos = ad.rows(params.tgt_embed, BOS)
    scores = [ad.constant(0.0)] + [ad.constant(SCORE_FILL) for _ in range(k - 1)]
    return BeamState(
        hidden=[state.hidden] * k, cell=[state.cell] * k, embed=[bos] * k,
        scores=scores, losses=[ad.constant(0.0) for _ in range(k)],
        step_index=0)


def _advance_slots(params: ModelParams, beam: BeamState, ann: Annotations,
                   mode: str | None = None
                   ) -> tuple[list[Tensor], list[Tensor], Tensor]:
    """Advance every slot's LSTM one step.

    Returns the new per-slot hidden and cell states and the K x |V| candidate
    score matrix C[b, v] = beam.score_b + step_log_score_b[v].
    """
    hiddens, cells, rows = [], [], []
    for b in range(beam.k):
        st = DecoderState(beam.hidden[b], beam.cell[b], beam.step_index)
        st, logits = decoder_step(params, st, beam.embed[b], ann)
        lp = step_log_scores(params, logits, mode)
        hiddens.append(st.hidden)
        cells.append(st.cell)
        rows.append(ad.add(lp, beam.scores[b]))
    return hiddens, cells, ad.stack(rows)


def candidate_scores(params: ModelParams, beam: BeamState, ann: Annotations,
                     mode: str | None = None) -> Tensor:
    """K x |V| matrix of cumulative successor scores for the current step."""
    _, _, c = _advance_slots(params, beam, ann, mode)
    return c


def exact_top_k(scores, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact k largest values (descending) with their flat indices.

    Ties break toward the lower flat index.  The result is plain numpy data:
    constant with respect to any tape.
    """
    flat = np.asarray(getattr(scores, "values", scores)).ravel()
    if k > flat.size:
        raise ContractViolation(f"top-{k} of only {flat.size} scores")
    order = np.argsort(-flat, kind="stable")[:k]
    return flat[order], order


@dataclass
class MSchedule:
    """The sequence of gradient-stopped top-k values used by one objective
    evaluation.

    The relaxation treats every m_k (and the final soft-1-argmax center) as
    a constant: gradients flow through the distance computation only.  In
    recording mode the schedule computes the values live and stores them;
    in replay mode it returns the stored values regardless of the current
    scores.  Replay is what makes finite-difference checks meaningful: a
    perturbed parameter must not move the constants the analytic gradient
    treats as fixed.
    """
    record: bool = True
    steps: list = field(default_factory=list)
    final: float | None = None
    _cursor: int = 0

    def begin(self) -> None:
        self._cursor = 0
        if self.record:
            self.steps.clear()
            self.final = None

    def step_top(self, flat: Tensor, k: int) -> np.ndarray:
        if self.record:
            vals, _ = exact_top_k(flat, k)
            self.steps.append(vals)
            return vals
        if self._cursor >= len(self.steps):
            raise ContractViolation("m-schedule replay ran past its end")
        vals = self.steps[self._cursor]
        self._cursor += 1
        return vals

    def final_top(self, scores: Tensor) -> float:
        if self.record:
            self.final = float(np.max(scores.values))
        if self.final is None:
            raise ContractViolation("m-schedule replay has no final value")
        return self.final


def soft_k_argmax(scores: Tensor, m_k: float, alpha: float) -> Tensor:
    """Weights peaked on the entries of `scores` closest to m_k:
    softmax_j(-alpha * (scores_j - m_k)^2).

    Sums to 1, entrywise >= 0; gradient flows through `scores` only (m_k is
    a constant).  Squared distance is the one place the distance shape is
    chosen, so swapping it means editing exactly this function.
    """
    if alpha <= 0:
        raise ContractViolation(f"alpha must be > 0, got {alpha}")
    dist = ad.squared_diff(scores, center=float(m_k))
    return ad.softmax(ad.scalar_mul(dist, -alpha), axis=-1)


def soft_beam_step(params: ModelParams, beam: BeamState, ann: Annotations,
                   gold_tok: int, alpha: float,
                   mode: str | None = None,
                   schedule: MSchedule | None = None) -> BeamState:
    """One step of the relaxed dynamics against gold token `gold_tok`
    (PAD on positions past the gold EOS)."""
    k = beam.k
    vocab = params.config.tgt_vocab
    hiddens, cells, c_matrix = _advance_slots(params, beam, ann, mode)
    c_flat = ad.reshape(c_matrix, (k * vocab,))
    if schedule is None:
        top_vals, _ = exact_top_k(c_flat, k)
    else:
        top_vals = schedule.step_top(c_flat, k)

    cost = hamming_cost_vector(vocab, gold_tok)
    h_stack = ad.stack(hiddens)
    c_stack = ad.stack(cells)
    loss_vec = ad.stack(beam.losses)

    new = BeamState([], [], [], [], [], beam.step_index + 1)
    for j in range(k):
        w = soft_k_argmax(c_flat, top_vals[j], alpha)
        w2 = ad.reshape(w, (k, vocab))
        row_m = ad.reduce_sum(w2, axis=1)   # soft backpointers
        col_m = ad.reduce_sum(w2, axis=0)   # soft label weights
        new.scores.append(ad.weighted_sum(w, c_flat))
        new.losses.append(ad.add(ad.weighted_sum(row_m, loss_vec),
                                 ad.weighted_sum(col_m, cost)))
        new.hidden.append(ad.weighted_sum(row_m, h_stack))
        new.cell.append(ad.weighted_sum(row_m, c_stack))
        new.embed.append(ad.weighted_sum(col_m, params.tgt_embed))
    return new


def _pad_extended(y: Sequence[int], t_max: int) -> list[int]:
    if not y or y[-1] != EOS:
        raise ContractViolation("variable-length gold must end with EOS")
    if len(y) > t_max:
        raise ContractViolation(f"gold length {len(y)} exceeds t_max {t_max}")
    return list(y) + [PAD] * (t_max - len(y))


def _step_budget(params: ModelParams, x: Sequence[int],
                 t_max: int | None) -> int:
    if params.config.attention_mode == "fixed":
        return len(x)
    if t_max is None:
        raise ContractViolation("variable-length decoding needs t_max")
    return t_max


def soft_beam_objective(params: ModelParams, x: Sequence[int],
                        y_star: Sequence[int], k: int, alpha: float,
                        t_max: int | None = None,
                        mode: str | None = None,
                        schedule: MSchedule | None = None) -> Tensor:
    """Relaxed direct-loss objective: run the soft dynamics to the step
    budget, then mix the final slot losses with soft-1-argmax weights over
    the final slot scores.  Differentiable end to end; converges pointwise
    to Hamming(beam output, gold) as alpha grows.

    A `schedule` in replay mode pins every gradient-stopped top-k value to
    a previous evaluation's constants, which is how finite-difference
    oracles must evaluate the objective.
    """
    if k < 1:
        raise ContractViolation(f"beam size must be >= 1, got {k}")
    if alpha <= 0:
        raise ContractViolation(f"alpha must be > 0, got {alpha}")
    n_steps = _step_budget(params, x, t_max)
    if params.config.attention_mode == "fixed":
        if len(y_star) != len(x):
            raise ContractViolation(
                f"tagging gold length {len(y_star)} != input length {len(x)}")
        gold = list(y_star)
    else:
        gold = _pad_extended(y_star, n_steps)

    if schedule is None:
        schedule = MSchedule(record=True)
    schedule.begin()
    ann = encode(params, x)
    beam = init_beam(params, ann, k)
    for t in range(n_steps):
        beam = soft_beam_step(params, beam, ann, gold[t], alpha, mode,
                              schedule)

    final_scores = ad.stack(beam.scores)
    m1 = schedule.final_top(final_scores)
    w = soft_k_argmax(final_scores, m1, alpha)
    return ad.weighted_sum(w, ad.stack(beam.losses))


# ---------------------------------------------------------------------------
# hard decoding
# ---------------------------------------------------------------------------

@dataclass
class Hypothesis:
    tokens: tuple[int, ...]
    score: float
    finished: bool = False
    state: DecoderState | None = None
    embed: Tensor | None = None


def _strip_eos(tokens: Sequence[int]) -> list[int]:
    out = list(tokens)
    return out[:out.index(EOS)] if EOS in out else out


def hard_beam_search(params: ModelParams, x: Sequence[int], k: int,
                     t_max: int | None = None, mode: str | None = None,
                     trace: list[str] | None = None
                     ) -> tuple[list[int], float, list[Hypothesis]]:
    """Standard beam search over step log-scores.

    Fixed-attention mode runs exactly len(x) steps.  Variable-length mode
    freezes a hypothesis when it emits EOS (it keeps occupying its slot) and
    stops when every slot is finished or the step budget t_max is spent;
    finished hypotheses are compared by total log-score with no length
    normalization.  Ties break by (higher score, lower flat candidate
    index).  Returns (best token sequence with EOS stripped, its log-score,
    the final beam).
    """
    if k < 1:
        raise ContractViolation(f"beam size must be >= 1, got {k}")
    variable = params.config.attention_mode != "fixed"
    n_steps = _step_budget(params, x, t_max)
    vocab = params.config.tgt_vocab

    ann = encode(params, x)
    state0 = init_decoder(params, ann)
    bos = ad.rows(params.tgt_embed, BOS)
    slots = [Hypothesis(tokens=(), score=0.0 if b == 0 else SCORE_FILL,
                        state=state0, embed=bos) for b in range(k)]

    for t in range(n_steps):
        if variable and all(s.finished for s in slots):
            break
        # candidate key = b * |V| + v; a frozen slot contributes itself once
        candidates: list[tuple[float, int, Hypothesis]] = []
        for b, hyp in enumerate(slots):
            if hyp.finished:
                candidates.append((hyp.score, b * vocab + EOS, hyp))
                continue
            st, logits = decoder_step(params, hyp.state, hyp.embed, ann)
            lp = step_log_scores(params, logits, mode).values
            for v in range(vocab):
                ext = Hypothesis(
                    tokens=hyp.tokens + (v,), score=hyp.score + float(lp[v]),
                    finished=variable and v == EOS, state=st,
                    embed=None)
                candidates.append((ext.score, b * vocab + v, ext))
        candidates.sort(key=lambda c: (-c[0], c[1]))
        slots = []
        for score, key, hyp in candidates[:k]:
            if not hyp.finished and hyp.embed is None:
                hyp.embed = ad.rows(params.tgt_embed, hyp.tokens[-1])
            slots.append(hyp)
            if trace is not None:
                trace.append(
                    f"step={t} slot={len(slots) - 1} score={score:.6f} "
                    f"loss=- backpointer={key // vocab} label={key % vocab}")

    pool = [s for s in slots if s.finished] if variable else slots
    if not pool:
        pool = slots
    best = max(pool, key=lambda s: (s.score, -slots.index(s)))
    tokens = _strip_eos(best.tokens) if variable else list(best.tokens)
    return tokens, best.score, slots


def greedy_decode(params: ModelParams, x: Sequence[int],
                  t_max: int | None = None,
                  mode: str | None = None) -> list[int]:
    tokens, _, _ = hard_beam_search(params, x, 1, t_max=t_max, mode=mode)
    return tokens


def soft_beam_map_decode(params: ModelParams, x: Sequence[int], k: int,
                         alpha: float, t_max: int | None = None,
                         mode: str | None = None, commit_states: bool = True,
                         trace: list[str] | None = None) -> list[int]:
    """Decode with the relaxed dynamics, reading off a discrete sequence via
    MAP estimates of the soft backpointers and labels.

    Each new slot records argmax_{b,v} W(k)[b,v]; with `commit_states` (the
    default) the slot's state and next embedding are taken from that (b, v)
    pair while scores stay soft mixtures, so the dynamics remain
    alpha-dependent.  With commit_states=False the states stay soft exactly
    as in training and only the readout is discrete.  The output traces the
    final soft-1-argmax winning slot back through the recorded pairs.
    """
    if alpha <= 0:
        raise ContractViolation(f"alpha must be > 0, got {alpha}")
    n_steps = _step_budget(params, x, t_max)
    vocab = params.config.tgt_vocab
    ann = encode(params, x)
    beam = init_beam(params, ann, k)
    back: list[list[tuple[int, int]]] = []

    for t in range(n_steps):
        hiddens, cells, c_matrix = _advance_slots(params, beam, ann, mode)
        c_flat = ad.reshape(c_matrix, (k * vocab,))
        top_vals, _ = exact_top_k(c_flat, k)
        h_stack = c_stack = None
        if not commit_states:
            h_stack = ad.stack(hiddens)
            c_stack = ad.stack(cells)

        new = BeamState([], [], [], [], [], beam.step_index + 1)
        pairs: list[tuple[int, int]] = []
        for j in range(k):
            w = soft_k_argmax(c_flat, top_vals[j], alpha)
            b_star, v_star = divmod(int(np.argmax(w.values)), vocab)
            pairs.append((b_star, v_star))
            score_j = ad.weighted_sum(w, c_flat)
            new.scores.append(score_j)
            new.losses.append(ad.constant(0.0))
            if commit_states:
                new.hidden.append(hiddens[b_star])
                new.cell.append(cells[b_star])
                new.embed.append(ad.rows(params.tgt_embed, v_star))
            else:
                w2 = ad.reshape(w, (k, vocab))
                row_m = ad.reduce_sum(w2, axis=1)
                col_m = ad.reduce_sum(w2, axis=0)
                new.hidden.append(ad.weighted_sum(row_m, h_stack))
                new.cell.append(ad.weighted_sum(row_m, c_stack))
                new.embed.append(ad.weighted_sum(col_m, params.tgt_embed))
            if trace is not None:
                trace.append(
                    f"step={t} slot={j} score={score_j.item():.6f} "
                    f"loss=- backpointer={b_star} label={v_star}")
        beam = new
        back.append(pairs)

    slot = int(np.argmax(ad.stack(beam.scores).values))
    tokens: list[int] = []
    for pairs in reversed(back):
        b_star, v_star = pairs[slot]
        tokens.append(v_star)
        slot = b_star
    tokens.reverse()
    if params.config.attention_mode != "fixed":
        tokens = _strip_eos(tokens)
    return tokens
