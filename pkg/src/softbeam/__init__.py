"""Recurrent seq2seq models under local and global normalization, with
teacher-forcing and self-normalized pre-training and search-aware training
through a continuous relaxation of beam search."""

from .autodiff import Tape, Tensor, backward, grad_check
from .beam import (AnnealSchedule, BeamState, hamming_cost,
                   hard_beam_search, greedy_decode, soft_beam_map_decode,
                   soft_beam_objective, soft_beam_step, soft_k_argmax)
from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig, load_config
from .data import (Corpus, Vocab, gen_lookahead_tagging, gen_transduction,
                   read_corpus, write_corpus)
from .errors import (ConfigError, ContractViolation, DataError,
                     NumericOverflow, ProtocolError, SoftbeamError)
from .metrics import EvalReport, bleu, evaluate, sequence_accuracy
from .model import (BOS, EOS, PAD, ModelConfig, ModelParams, encode,
                    init_params, sequence_log_score)
from .objectives import (LogZStats, logz_stats, self_normalized_nll,
                         teacher_forcing_nll)
from .training import (TrainResult, decode_corpus, run_pretrain,
                       run_search_aware)

__version__ = "0.1.0"

__all__ = [
    "AnnealSchedule", "BeamState", "BOS", "ConfigError", "ContractViolation",
    "Corpus", "DataError", "EOS", "EvalReport", "LogZStats", "ModelConfig",
    "ModelParams", "NumericOverflow", "PAD", "ProtocolError", "SoftbeamError",
    "Tape", "Tensor", "TrainConfig", "TrainResult", "Vocab", "backward",
    "bleu", "decode_corpus", "encode", "evaluate", "gen_lookahead_tagging",
    "gen_transduction", "grad_check", "greedy_decode", "hamming_cost",
    "hard_beam_search", "init_params", "load_checkpoint", "load_config",
    "logz_stats", "read_corpus", "run_pretrain", "run_search_aware",
    "save_checkpoint", "self_normalized_nll", "sequence_accuracy",
    "sequence_log_score", "soft_beam_map_decode", "soft_beam_objective",
    "soft_beam_step", "soft_k_argmax", "teacher_forcing_nll",
    "write_corpus",
]
