"""LSTM encoder-decoder producing per-step successor scores in log space.

The decoder is configurable along three axes:

* encoder direction: unidirectional (annotation row i sees x[:i+1] only) or
  bidirectional (concatenated forward/backward passes),
* attention: "fixed" ties decoding step i to annotation row i (tagging-style,
  output length == input length, zero initial decoder state) or "content"
  (bilinear attention over all rows, initial state transformed from the last
  annotation row),
* normalization: "local" turns step logits into log-probabilities,
  "global" leaves them as unnormalized log-scores.

Scores s are non-negative by construction because everything is kept as
log s = logit; sequence scores are sums of per-step values.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterator, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractViolation, DataError

PAD, BOS, EOS = 0, 1, 2
RESERVED_TOKENS = ("<pad>", "<bos>", "<eos>")

ENCODER_MODES = ("unidirectional", "bidirectional")
ATTENTION_MODES = ("fixed", "content")
NORMALIZATION_MODES = ("local", "global")


@dataclass
class ModelConfig:
    src_vocab: int
    tgt_vocab: int
    embed_dim: int
    hidden_dim: int
    encoder_mode: str = "unidirectional"
    attention_mode: str = "fixed"
    normalization_mode: str = "local"

    def __post_init__(self):
        if self.encoder_mode not in ENCODER_MODES:
            raise ContractViolation(f"bad encoder_mode {self.encoder_mode!r}")
        if self.attention_mode not in ATTENTION_MODES:
            raise ContractViolation(f"bad attention_mode {self.attention_mode!r}")
        if self.normalization_mode not in NORMALIZATION_MODES:
            raise ContractViolation(
                f"bad normalization_mode {self.normalization_mode!r}")

    @property
    def annotation_dim(self) -> int:
        return self.hidden_dim * (2 if self.encoder_mode == "bidirectional" else 1)


@dataclass
class LSTMWeights:
    """One LSTM direction: per-gate input/recurrent matrices and biases."""
    wxi: Tensor
    whi: Tensor
    bi: Tensor
    wxf: Tensor
    whf: Tensor
    bf: Tensor
    wxo: Tensor
    who: Tensor
    bo: Tensor
    wxc: Tensor
    whc: Tensor
    bc: Tensor

    def items(self) -> Iterator[tuple[str, Tensor]]:
        for f in fields(self):
            yield f.name, getattr(self, f.name)


def _init_lstm(rng: np.random.Generator, in_dim: int, h: int,
               scale: float) -> LSTMWeights:
    def mat(r, c):
        return Tensor(rng.uniform(-scale, scale, size=(r, c)))

    def vec(r):
        return Tensor(rng.uniform(-scale, scale, size=(r,)))

    return LSTMWeights(
        wxi=mat(h, in_dim), whi=mat(h, h), bi=vec(h),
        wxf=mat(h, in_dim), whf=mat(h, h), bf=vec(h),
        wxo=mat(h, in_dim), who=mat(h, h), bo=vec(h),
        wxc=mat(h, in_dim), whc=mat(h, h), bc=vec(h),
    )


@dataclass
class ModelParams:
    config: ModelConfig
    src_embed: Tensor                 # (|V_src|, d)
    tgt_embed: Tensor                 # (|V|, d)
    enc_fwd: LSTMWeights
    enc_bwd: LSTMWeights | None       # bidirectional only
    dec: LSTMWeights                  # input dim = d + annotation_dim
    attn: Tensor | None               # (h, annotation_dim), content mode only
    init_h_w: Tensor | None           # (h, annotation_dim), content mode only
    init_h_b: Tensor | None
    init_c_w: Tensor | None
    init_c_b: Tensor | None
    out_w: Tensor                     # (|V|, h)
    out_b: Tensor                     # (|V|,)

    def items(self) -> list[tuple[str, Tensor]]:
        """Parameter tensors in the declared (checkpoint) order."""
        out = [("src_embed", self.src_embed), ("tgt_embed", self.tgt_embed)]
        out += [(f"enc_fwd.{k}", t) for k, t in self.enc_fwd.items()]
        if self.enc_bwd is not None:
            out += [(f"enc_bwd.{k}", t) for k, t in self.enc_bwd.items()]
        out += [(f"dec.{k}", t) for k, t in self.dec.items()]
        if self.config.attention_mode == "content":
            out += [("attn", self.attn),
                    ("init_h_w", self.init_h_w), ("init_h_b", self.init_h_b),
                    ("init_c_w", self.init_c_w), ("init_c_b", self.init_c_b)]
        out += [("out_w", self.out_w), ("out_b", self.out_b)]
        return out

    def tensors(self) -> list[Tensor]:
        return [t for _, t in self.items()]


def init_params(config: ModelConfig, seed: int, scale: float = 0.1) -> ModelParams:
    """Fresh parameters, uniform(-scale, scale), fully determined by seed."""
    rng = np.random.default_rng(seed)
    d, h = config.embed_dim, config.hidden_dim
    ann = config.annotation_dim

    def mat(r, c):
        return Tensor(rng.uniform(-scale, scale, size=(r, c)))

    def vec(r):
        return Tensor(rng.uniform(-scale, scale, size=(r,)))

    src_embed = mat(config.src_vocab, d)
    tgt_embed = mat(config.tgt_vocab, d)
    enc_fwd = _init_lstm(rng, d, h, scale)
    enc_bwd = (_init_lstm(rng, d, h, scale)
               if config.encoder_mode == "bidirectional" else None)
    dec = _init_lstm(rng, d + ann, h, scale)
    if config.attention_mode == "content":
        attn = mat(h, ann)
        init_h_w, init_h_b = mat(h, ann), vec(h)
        init_c_w, init_c_b = mat(h, ann), vec(h)
    else:
        attn = init_h_w = init_h_b = init_c_w = init_c_b = None
    return ModelParams(
        config=config, src_embed=src_embed, tgt_embed=tgt_embed,
        enc_fwd=enc_fwd, enc_bwd=enc_bwd, dec=dec, attn=attn,
        init_h_w=init_h_w, init_h_b=init_h_b,
        init_c_w=init_c_w, init_c_b=init_c_b,
        out_w=mat(config.tgt_vocab, h), out_b=vec(config.tgt_vocab))


@dataclass
class Annotations:
    """Per-position encoder outputs, one row per input token."""
    rows: Tensor       # (n, annotation_dim)
    length: int


@dataclass
class DecoderState:
    hidden: Tensor     # (h,)
    cell: Tensor       # (h,)
    step_index: int = 0


def lstm_step(w: LSTMWeights, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
    i = ad.sigmoid(ad.add(ad.add(ad.matmul(w.wxi, x), ad.matmul(w.whi, h)), w.bi))
    f = ad.sigmoid(ad.add(ad.add(ad.matmul(w.wxf, x), ad.matmul(w.whf, h)), w.bf))
    o = ad.sigmoid(ad.add(ad.add(ad.matmul(w.wxo, x), ad.matmul(w.who, h)), w.bo))
    g = ad.tanh(ad.add(ad.add(ad.matmul(w.wxc, x), ad.matmul(w.whc, h)), w.bc))
    c_new = ad.add(ad.mul(f, c), ad.mul(i, g))
    h_new = ad.mul(o, ad.tanh(c_new))
    return h_new, c_new


def encode(params: ModelParams, x: Sequence[int]) -> Annotations:
    """Run the encoder over token ids; row i of a unidirectional encoding is
    a function of x[:i+1] only."""
    cfg = params.config
    n = len(x)
    if n < 1:
        raise DataError("encode: empty input sequence")
    for tok in x:
        if not 0 <= tok < cfg.src_vocab:
            raise DataError(f"encode: token id {tok} outside source vocab "
                            f"of size {cfg.src_vocab}")

    h = ad.zeros(cfg.hidden_dim)
    c = ad.zeros(cfg.hidden_dim)
    fwd = []
    for t in range(n):
        e = ad.rows(params.src_embed, x[t])
        h, c = lstm_step(params.enc_fwd, e, h, c)
        fwd.append(h)

    if cfg.encoder_mode == "unidirectional":
        return Annotations(rows=ad.stack(fwd), length=n)

    h = ad.zeros(cfg.hidden_dim)
    c = ad.zeros(cfg.hidden_dim)
    bwd = [None] * n
    for t in reversed(range(n)):
        e = ad.rows(params.src_embed, x[t])
        h, c = lstm_step(params.enc_bwd, e, h, c)
        bwd[t] = h
    both = [ad.concat([fwd[t], bwd[t]], axis=0) for t in range(n)]
    return Annotations(rows=ad.stack(both), length=n)


def init_decoder(params: ModelParams, ann: Annotations) -> DecoderState:
    """Initial decoder state: all zeros in fixed-attention (tagging) mode, a
    learned affine+tanh of the final annotation row in content mode."""
    h = params.config.hidden_dim
    if params.config.attention_mode == "fixed":
        return DecoderState(ad.zeros(h), ad.zeros(h), 0)
    last = ad.rows(ann.rows, ann.length - 1)
    h0 = ad.tanh(ad.add(ad.matmul(params.init_h_w, last), params.init_h_b))
    c0 = ad.tanh(ad.add(ad.matmul(params.init_c_w, last), params.init_c_b))
    return DecoderState(h0, c0, 0)


def decoder_step(params: ModelParams, state: DecoderState, prev_embed: Tensor,
                 ann: Annotations) -> tuple[DecoderState, Tensor]:
    """Advance one step; returns the new state and |V| logits.

    Fixed mode reads annotation row `state.step_index` as the context;
    content mode mixes rows with bilinear attention scored against the
    current hidden state.
    """
    cfg = params.config
    if cfg.attention_mode == "fixed":
        if state.step_index >= ann.length:
            raise ContractViolation(
                f"fixed-attention step {state.step_index} beyond input length "
                f"{ann.length}")
        context = ad.rows(ann.rows, state.step_index)
    else:
        keys = ad.matmul(state.hidden, params.attn)        # (ann_dim,)
        scores = ad.matmul(ann.rows, keys)                 # (n,)
        weights = ad.softmax(scores, axis=0)
        context = ad.weighted_sum(weights, ann.rows)       # (ann_dim,)

    x = ad.concat([prev_embed, context], axis=0)
    h_new, c_new = lstm_step(params.dec, x, state.hidden, state.cell)
    logits = ad.add(ad.matmul(params.out_w, h_new), params.out_b)
    return DecoderState(h_new, c_new, state.step_index + 1), logits


def step_log_scores(params: ModelParams, logits: Tensor,
                    mode: str | None = None) -> Tensor:
    """Per-step successor scores in log space.

    local mode: log-softmax (a proper log-distribution); global mode: the raw
    logits, i.e. unnormalized log-scores.  `mode` overrides the model's flag,
    which is how a locally trained model gets decoded with raw scores.
    """
    mode = mode or params.config.normalization_mode
    if mode == "global":
        return logits
    return ad.sub(logits, ad.logsumexp(logits))


def local_log_normalizer(logits: Tensor) -> Tensor:
    """log Z of one step: log of the summed (exponentiated) successor scores."""
    return ad.logsumexp(logits)


def check_length_contract(params: ModelParams, x: Sequence[int],
                          y: Sequence[int]) -> None:
    if params.config.attention_mode == "fixed":
        if len(y) != len(x):
            raise ContractViolation(
                f"fixed-attention output length {len(y)} != input length {len(x)}")
    else:
        if not y or y[-1] != EOS:
            raise ContractViolation("variable-length target must end with EOS")


def forced_logits(params: ModelParams, x: Sequence[int],
                  y: Sequence[int]) -> Iterator[Tensor]:
    """Teacher-forced decoding: yields the logits of every step with the gold
    prefix fed back as history."""
    ann = encode(params, x)
    state = init_decoder(params, ann)
    prev = ad.rows(params.tgt_embed, BOS)
    for tok in y:
        if not 0 <= tok < params.config.tgt_vocab:
            raise DataError(f"target token id {tok} outside vocab "
                            f"of size {params.config.tgt_vocab}")
        state, logits = decoder_step(params, state, prev, ann)
        yield logits
        prev = ad.rows(params.tgt_embed, tok)


def sequence_log_score(params: ModelParams, x: Sequence[int], y: Sequence[int],
                       mode: str | None = None) -> Tensor:
    """Sum of per-step log-scores of y under teacher forcing.

    local mode gives log p(y|x); global mode gives the unnormalized sequence
    log-score (the global normalizer is never subtracted: it is intractable
    in general and irrelevant for ranking).
    """
    check_length_contract(params, x, y)
    total = ad.zeros(())
    for tok, logits in zip(y, forced_logits(params, x, y)):
        lp = step_log_scores(params, logits, mode)
        total = ad.add(total, ad.rows(lp, tok))
    return total


def exhaustive_log_normalizer(params: ModelParams, x: Sequence[int],
                              length: int) -> float:
    """Brute-force log Z_G over all fixed-length output sequences.

    Exponential in `length`; exists for tests on tiny spaces only.
    """
    import itertools

    v = params.config.tgt_vocab
    scores = [sequence_log_score(params, x, list(y), mode="global").item()
              for y in itertools.product(range(v), repeat=length)]
    m = max(scores)
    return m + float(np.log(np.sum(np.exp(np.asarray(scores) - m))))
