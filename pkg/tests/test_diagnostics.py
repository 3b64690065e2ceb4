"""Diagnostics: the hand-built suppression construction, the local-mode
logit grid scan, and small smoke runs of the randomized suites.

The suppression construction is a two-step, two-live-token decoding
problem where the first step scores the bad token `advantage` above the
good one and the second step swings every successor score by a large
amount whose sign depends on which token the slot consumed.  The grid
scan's oracle here is an independent brute-force loop over per-slot
logit differences with log-softmax computed the naive way.
"""

import math

import numpy as np
import pytest

from softbeam.diagnostics import (BAD_TOKEN, GOOD_TOKEN,
                                  build_suppression_params,
                                  local_logit_grid_search,
                                  run_alpha_convergence,
                                  run_decode_agreement,
                                  run_suppression_demo)
from softbeam.errors import ConfigError

LOG2 = math.log(2.0)


# ---------------------------------------------------------------------------
# hand-built suppression model
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("advantage", [0.2, LOG2 + 0.2, 2.0])
def test_global_mode_suppresses_bad_prefix(advantage):
    out = run_suppression_demo(advantage, mode="global")
    # the bad token leads the first beam by construction
    assert out.first_beam == [BAD_TOKEN, GOOD_TOKEN]
    assert out.bad_slot_led
    # yet every surviving second-step slot descends from the good token:
    # raw scores let the +/-40 swing erase the first-step advantage
    assert out.bad_prefix_suppressed
    assert all(slot[0] == GOOD_TOKEN for slot in out.final_slots)
    # within the good prefix, the successor with the extra bias wins
    assert out.final_slots[0] == (GOOD_TOKEN, BAD_TOKEN)


@pytest.mark.parametrize("advantage", [0.2, LOG2 + 0.2, 2.0])
def test_local_mode_keeps_bad_prefix(advantage):
    out = run_suppression_demo(advantage, mode="local")
    assert out.first_beam == [BAD_TOKEN, GOOD_TOKEN]
    # per-step normalization is shift-invariant, so the huge swing cancels
    # inside each slot and the bad prefix keeps its first-step advantage
    assert not out.bad_prefix_suppressed
    assert out.final_slots[0][0] == BAD_TOKEN
    assert out.final_slots[0] == (BAD_TOKEN, BAD_TOKEN)


def test_global_suppression_scores_reflect_swing():
    out = run_suppression_demo(1.0, mode="global")
    # both survivors carry the good slot's +swing*h hidden contribution,
    # so their raw totals sit far above anything the bad prefix could reach
    assert min(out.final_scores) > 20.0


def test_suppression_rejects_nonpositive_advantage():
    with pytest.raises(ConfigError):
        build_suppression_params(0.0)
    with pytest.raises(ConfigError):
        run_suppression_demo(-1.0)


# ---------------------------------------------------------------------------
# local-mode logit grid scan
# ---------------------------------------------------------------------------


def brute_force_grid(advantage, span=12.0, points=241):
    """Independent scan: per-slot log-softmax computed naively on every
    pair of logit-difference assignments."""
    grid = np.linspace(-span, span, points)
    full = top1 = False
    for d_good in grid:
        pg = np.exp([d_good, 0.0])
        lg = np.log(pg / pg.sum())
        for d_bad in grid:
            pb = np.exp([d_bad, 0.0])
            lb = advantage + np.log(pb / pb.sum())
            full = full or bool(lg.min() > lb.max())
            top1 = top1 or bool(lg.max() > lb.max())
    return full, top1


@pytest.mark.parametrize("advantage", [0.1, LOG2 - 0.05, LOG2 + 0.05, 1.0,
                                       3.0])
def test_grid_search_matches_brute_force(advantage):
    got = local_logit_grid_search(advantage)
    full, top1 = brute_force_grid(advantage)
    assert got.full_suppression_possible == full
    assert got.top1_rescue_possible == top1


def test_grid_full_suppression_never_possible():
    # closed form: the good slot's weaker successor scores at most -log 2
    # (both successors tied), while the bad slot's stronger successor
    # scores at least advantage - log 2, so suppression needs advantage < 0
    for advantage in (0.05, LOG2 - 0.2, LOG2 + 0.2, 2.0, 10.0):
        assert not local_logit_grid_search(advantage).full_suppression_possible


def test_grid_top1_rescue_boundary_at_log2():
    # the good slot's best successor approaches 0 from below; the bad
    # slot's best floors at advantage - log 2, so rescue needs
    # advantage < log 2
    assert local_logit_grid_search(LOG2 - 0.2).top1_rescue_possible
    assert not local_logit_grid_search(LOG2 + 0.2).top1_rescue_possible


def test_grid_rejects_nonpositive_advantage():
    with pytest.raises(ConfigError):
        local_logit_grid_search(0.0)


# ---------------------------------------------------------------------------
# randomized suites, small smoke sizes
# ---------------------------------------------------------------------------


def test_decode_agreement_smoke():
    result = run_decode_agreement(instances=25, seed=3)
    assert result.instances == 25
    assert result.rate >= 0.96
    assert result.max_objective_gap < 1e-3


def test_alpha_convergence_smoke():
    frac = run_alpha_convergence(instances=10, seed=0)
    assert frac >= 0.9
