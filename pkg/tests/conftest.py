"""Shared fixtures: tiny models and a hand LSTM-cell reference reused
across test modules."""

import numpy as np
import pytest

from softbeam.model import ModelConfig, init_params


def make_params(src_vocab=8, tgt_vocab=8, embed_dim=4, hidden_dim=4,
                encoder_mode="unidirectional", attention_mode="fixed",
                normalization_mode="local", seed=0, scale=0.1):
    cfg = ModelConfig(src_vocab=src_vocab, tgt_vocab=tgt_vocab,
                      embed_dim=embed_dim, hidden_dim=hidden_dim,
                      encoder_mode=encoder_mode, attention_mode=attention_mode,
                      normalization_mode=normalization_mode)
    return init_params(cfg, seed=seed, scale=scale)


def np_lstm(w, x, h, c):
    """Plain-numpy LSTM cell, written independently as a test oracle."""
    sig = lambda z: 1.0 / (1.0 + np.exp(-z))
    i = sig(w.wxi.values @ x + w.whi.values @ h + w.bi.values)
    f = sig(w.wxf.values @ x + w.whf.values @ h + w.bf.values)
    o = sig(w.wxo.values @ x + w.who.values @ h + w.bo.values)
    g = np.tanh(w.wxc.values @ x + w.whc.values @ h + w.bc.values)
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_local():
    return make_params()


@pytest.fixture
def tiny_global():
    return make_params(normalization_mode="global")
