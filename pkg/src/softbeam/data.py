"""Synthetic tasks, corpora, and corpus file IO.

Two generator families cover the two search regimes the library studies:

* lookahead tagging: one tag per input token, where the tags of designated
  ambiguous words are a deterministic function of the sequence-final mode
  token.  A model reading the full input can reach 100% accuracy; any
  left-to-right greedy predictor is capped by an analytic ceiling because
  the disambiguating token arrives last.
* rule transduction: the gold output is computed from the input by a
  published rule oracle (blockwise reversal followed by per-token rewrite
  rules that change the length), giving non-monotone alignment and a
  variable-length output space.

Corpus files are plain text, one example per line: source tokens, a tab,
target tokens, each side space-separated.  Vocabularies live in sidecar
files, one token per line, with ids 0..2 fixed to <pad>, <bos>, <eos>.
A small JSON sidecar carries the task kind and step budget so a round trip
restores the corpus exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ContractViolation, DataError
from .model import EOS, RESERVED_TOKENS

N_MODES = 4             # lookahead mode words (and tags per ambiguous word)
DEFAULT_TAG_VOCAB = 32
DEFAULT_TRANS_VOCAB = 64
DEFAULT_T_MAX = 24

TASK_KINDS = ("tagging", "transduction")


@dataclass
class Vocab:
    """Token list where the index is the id; ids 0..2 are reserved."""
    tokens: list[str]
    lookup: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if tuple(self.tokens[:3]) != RESERVED_TOKENS:
            raise DataError(
                f"vocabulary must start with {RESERVED_TOKENS}, "
                f"got {tuple(self.tokens[:3])}")
        self.lookup = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.lookup) != len(self.tokens):
            raise DataError("vocabulary contains duplicate tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    def to_ids(self, toks: Sequence[str], where: str = "") -> list[int]:
        ids = []
        for tok in toks:
            if tok not in self.lookup:
                raise DataError(f"{where}token {tok!r} not in vocabulary")
            ids.append(self.lookup[tok])
        return ids

    def to_tokens(self, ids: Sequence[int]) -> list[str]:
        return [self.tokens[i] for i in ids]


def _make_vocab(prefixed: list[str]) -> Vocab:
    return Vocab(list(RESERVED_TOKENS) + prefixed)


@dataclass
class Corpus:
    examples: list[tuple[list[int], list[int]]]
    src_vocab: Vocab
    tgt_vocab: Vocab
    task_kind: str
    t_max: int | None = None

    def __post_init__(self):
        if self.task_kind not in TASK_KINDS:
            raise DataError(f"unknown task kind {self.task_kind!r}")
        for i, (x, y) in enumerate(self.examples):
            if self.task_kind == "tagging":
                if len(y) != len(x):
                    raise DataError(
                        f"example {i}: tagging needs |y| == |x|, "
                        f"got {len(y)} vs {len(x)}")
            else:
                if not y or y[-1] != EOS:
                    raise DataError(f"example {i}: target must end with EOS")
                if self.t_max is None or len(y) > self.t_max:
                    raise DataError(
                        f"example {i}: target length {len(y)} exceeds "
                        f"t_max {self.t_max}")

    def __len__(self) -> int:
        return len(self.examples)


def _check_n_range(n_range: tuple[int, int], lo_min: int) -> None:
    lo, hi = n_range
    if lo < lo_min or hi < lo:
        raise ContractViolation(f"bad length range {n_range}")


# ---------------------------------------------------------------------------
# lookahead tagging
# ---------------------------------------------------------------------------
#
# Generating rule (source vocab of size S, reserved ids 0..2):
#   * the last N_MODES ids are mode words m_0..m_3; the ids in between are
#     content words.
#   * a sequence is L-1 uniform content words followed by one uniform mode
#     word, L drawn uniformly from n_range.
#   * the first round(ambiguity_rate * #content) content words are the
#     ambiguous set.
#   * tags (target vocab = reserved + t_0..t_{N_MODES-1}):
#       plain content word w  ->  t_{(w-3) mod N_MODES}
#       ambiguous word w with mode m_j  ->  t_{(w-3+j) mod N_MODES}
#       mode word m_j  ->  t_j
#
# Every tag is a function of (word, final mode token), so full-input Bayes
# accuracy is 100%.  With the mode drawn uniformly, an ambiguous word's tag
# is uniform over all N_MODES tags given any proper prefix, so the best
# prefix-only predictor scores 1/N_MODES on ambiguous slots and 1 elsewhere.


def gen_lookahead_tagging(n_range: tuple[int, int] = (4, 8),
                          vocab_size: int = DEFAULT_TAG_VOCAB,
                          ambiguity_rate: float = 1.0, seed: int = 0,
                          count: int = 100) -> Corpus:
    if vocab_size < 4:
        raise ContractViolation(f"vocab_size must be >= 4, got {vocab_size}")
    if not 0 <= ambiguity_rate <= 1:
        raise ContractViolation(
            f"ambiguity_rate must be in [0, 1], got {ambiguity_rate}")
    _check_n_range(n_range, 2)
    n_content = vocab_size - 3 - N_MODES
    if n_content < 1:
        raise DataError(
            f"vocab_size {vocab_size} leaves no content words "
            f"(need >= {4 + N_MODES})")
    if count < 1:
        raise ContractViolation("count must be >= 1")

    n_amb = round(ambiguity_rate * n_content)
    first_mode = vocab_size - N_MODES
    src_vocab = _make_vocab(
        [f"w{i}" for i in range(n_content)]
        + [f"m{j}" for j in range(N_MODES)])
    tgt_vocab = _make_vocab([f"t{j}" for j in range(N_MODES)])

    rng = np.random.default_rng(seed)
    lo, hi = n_range
    examples = []
    for _ in range(count):
        length = int(rng.integers(lo, hi + 1))
        words = [int(w) for w in rng.integers(3, 3 + n_content, length - 1)]
        mode = int(rng.integers(0, N_MODES))
        x = words + [first_mode + mode]
        y = []
        for w in words:
            shift = mode if (w - 3) < n_amb else 0
            y.append(3 + (w - 3 + shift) % N_MODES)
        y.append(3 + mode)
        examples.append((x, y))
    return Corpus(examples, src_vocab, tgt_vocab, "tagging")


def lookahead_greedy_ceiling(n_range: tuple[int, int] = (4, 8),
                             vocab_size: int = DEFAULT_TAG_VOCAB,
                             ambiguity_rate: float = 1.0) -> float:
    """Expected token accuracy of the best predictor that sees only the
    input prefix up to each position: 1/N_MODES on ambiguous slots, 1
    elsewhere, averaged over the length distribution."""
    n_content = vocab_size - 3 - N_MODES
    if n_content < 1:
        raise DataError(f"vocab_size {vocab_size} leaves no content words")
    n_amb = round(ambiguity_rate * n_content)
    p_amb = n_amb / n_content
    lo, hi = n_range
    mean_len = (lo + hi) / 2
    amb_token_frac = p_amb * (mean_len - 1) / mean_len
    return 1.0 - amb_token_frac * (1.0 - 1.0 / N_MODES)


def unigram_baseline_accuracy(corpus: Corpus,
                              eval_corpus: Corpus | None = None) -> float:
    """Token accuracy of the strongest lookahead-free baseline: predict the
    majority tag of each word type (ties to the lowest tag id).

    Fitting and scoring on the same corpus inflates the estimate by the
    argmax-of-counts selection bias (about 1% at 10k examples); pass a
    fresh `eval_corpus` for an unbiased score.  Unseen words fall back to
    the lowest tag id.
    """
    counts: dict[int, dict[int, int]] = {}
    for x, y in corpus.examples:
        for w, t in zip(x, y):
            counts.setdefault(w, {}).setdefault(t, 0)
            counts[w][t] += 1
    best = {w: min((-c, t) for t, c in tags.items())[1]
            for w, tags in counts.items()}
    correct = total = 0
    for x, y in (eval_corpus or corpus).examples:
        for w, t in zip(x, y):
            correct += best.get(w, 3) == t
            total += 1
    return correct / total


# ---------------------------------------------------------------------------
# rule transduction
# ---------------------------------------------------------------------------
#
# Oracle rule for input x:
#   1. split x into consecutive blocks of `reorder_window` tokens and
#      reverse each block (window 0 or 1 leaves the order unchanged);
#   2. rewrite each token w by its id class ("classes" mode):
#        (w - 3) % 3 == 0  ->  emit w twice
#        (w - 3) % 3 == 1  ->  emit w once
#        (w - 3) % 3 == 2  ->  emit nothing
#      ("identity" mode emits every token once);
#   3. append EOS.


REWRITE_MODES = ("classes", "identity")


def transduction_oracle(x: Sequence[int], reorder_window: int,
                        rewrite: str = "classes") -> list[int]:
    if rewrite not in REWRITE_MODES:
        raise ContractViolation(f"unknown rewrite mode {rewrite!r}")
    if reorder_window < 0:
        raise ContractViolation(
            f"reorder_window must be >= 0, got {reorder_window}")
    reordered: list[int] = []
    step = max(reorder_window, 1)
    for start in range(0, len(x), step):
        block = list(x[start:start + step])
        reordered.extend(reversed(block) if reorder_window > 1 else block)
    y: list[int] = []
    for w in reordered:
        if rewrite == "identity":
            y.append(w)
            continue
        cls = (w - 3) % 3
        if cls == 0:
            y.extend([w, w])
        elif cls == 1:
            y.append(w)
    y.append(EOS)
    return y


def gen_transduction(n_range: tuple[int, int] = (3, 8),
                     vocab_size: int = DEFAULT_TRANS_VOCAB,
                     reorder_window: int = 3, seed: int = 0,
                     count: int = 100, rewrite: str = "classes",
                     t_max: int = DEFAULT_T_MAX) -> Corpus:
    if vocab_size < 4:
        raise ContractViolation(f"vocab_size must be >= 4, got {vocab_size}")
    if reorder_window < 0:
        raise ContractViolation(
            f"reorder_window must be >= 0, got {reorder_window}")
    _check_n_range(n_range, 1)
    if count < 1:
        raise ContractViolation("count must be >= 1")
    lo, hi = n_range
    if 2 * hi + 1 > t_max:
        raise DataError(
            f"max input length {hi} can produce outputs longer than "
            f"t_max {t_max}")

    vocab = _make_vocab([f"w{i}" for i in range(vocab_size - 3)])
    rng = np.random.default_rng(seed)
    examples = []
    for _ in range(count):
        length = int(rng.integers(lo, hi + 1))
        x = [int(w) for w in rng.integers(3, vocab_size, length)]
        y = transduction_oracle(x, reorder_window, rewrite)
        examples.append((x, y))
    return Corpus(examples, vocab, vocab, "transduction", t_max=t_max)


# ---------------------------------------------------------------------------
# corpus IO
# ---------------------------------------------------------------------------


def write_vocab(vocab: Vocab, path: str | Path) -> None:
    Path(path).write_text("".join(tok + "\n" for tok in vocab.tokens))


def read_vocab(path: str | Path) -> Vocab:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise DataError(f"{path}: empty vocabulary file")
    return Vocab(lines)


def _sidecars(path: str | Path) -> tuple[Path, Path, Path, Path]:
    p = Path(path)
    return p, p.with_suffix(p.suffix + ".src.vocab"), \
        p.with_suffix(p.suffix + ".tgt.vocab"), \
        p.with_suffix(p.suffix + ".meta")


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    main, src_p, tgt_p, meta_p = _sidecars(path)
    lines = []
    for x, y in corpus.examples:
        lines.append(" ".join(corpus.src_vocab.to_tokens(x)) + "\t"
                     + " ".join(corpus.tgt_vocab.to_tokens(y)))
    main.write_text("".join(line + "\n" for line in lines))
    write_vocab(corpus.src_vocab, src_p)
    write_vocab(corpus.tgt_vocab, tgt_p)
    meta_p.write_text(json.dumps(
        {"task_kind": corpus.task_kind, "t_max": corpus.t_max}) + "\n")


def read_corpus(path: str | Path) -> Corpus:
    main, src_p, tgt_p, meta_p = _sidecars(path)
    for p in (main, src_p, tgt_p, meta_p):
        if not p.exists():
            raise DataError(f"missing corpus file {p}")
    src_vocab = read_vocab(src_p)
    tgt_vocab = read_vocab(tgt_p)
    meta = json.loads(meta_p.read_text())
    examples = []
    for i, line in enumerate(main.read_text().splitlines(), start=1):
        if "\t" not in line:
            raise DataError(f"{main}: line {i}: missing tab separator")
        src_part, tgt_part = line.split("\t", 1)
        x = src_vocab.to_ids(src_part.split(), where=f"{main}: line {i}: ")
        y = tgt_vocab.to_ids(tgt_part.split(), where=f"{main}: line {i}: ")
        examples.append((x, y))
    return Corpus(examples, src_vocab, tgt_vocab, meta["task_kind"],
                  t_max=meta["t_max"])


def iter_batches(examples: Sequence, batch_size: int,
                 rng: np.random.Generator | None = None) -> Iterator[list]:
    """Yield shuffled minibatches (the last one may be short)."""
    if batch_size < 1:
        raise ContractViolation("batch_size must be >= 1")
    order = np.arange(len(examples))
    if rng is not None:
        rng.shuffle(order)
    for start in range(0, len(order), batch_size):
        yield [examples[i] for i in order[start:start + batch_size]]
