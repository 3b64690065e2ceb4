"""Tensor core: primitive forward oracles, backward rules against finite
differences, tape semantics, and the grad_check harness itself."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softbeam import autodiff as ad
from softbeam.autodiff import Tape, Tensor, grad_check
from softbeam.errors import ContractViolation, NumericOverflow, ProtocolError

# ---------------------------------------------------------------------------
# forward oracles
# ---------------------------------------------------------------------------


def test_softmax_symmetry():
    out = ad.softmax(Tensor([0.0, 0.0]))
    assert np.allclose(out.values, [0.5, 0.5])


def test_logsumexp_two_zeros():
    out = ad.logsumexp(Tensor([0.0, 0.0]))
    assert abs(out.item() - np.log(2.0)) < 1e-12


def test_matmul_matches_triple_loop(rng):
    a = rng.normal(size=(2, 3))
    b = rng.normal(size=(3, 4))
    want = np.zeros((2, 4))
    for i in range(2):
        for j in range(4):
            for k in range(3):
                want[i, j] += a[i, k] * b[k, j]
    got = ad.matmul(Tensor(a), Tensor(b))
    assert got.shape == (2, 4)
    assert np.allclose(got.values, want, atol=1e-12)


def test_mismatch_mask_is_zero_at_hot_one_elsewhere():
    m = ad.mismatch_mask(5, 2)
    assert m.values.tolist() == [1.0, 1.0, 0.0, 1.0, 1.0]
    with pytest.raises(ContractViolation):
        ad.mismatch_mask(5, 5)


def test_rows_int_index_drops_axis_and_list_keeps_it(rng):
    a = Tensor(rng.normal(size=(4, 3)))
    assert ad.rows(a, 1).shape == (3,)
    assert ad.rows(a, [1, 1, 2]).shape == (3, 3)
    with pytest.raises(ContractViolation):
        ad.rows(a, 4)


# ---------------------------------------------------------------------------
# backward oracles
# ---------------------------------------------------------------------------


def _grad_of(build, *tensors):
    for t in tensors:
        t.zero_grad()
    with Tape() as tape:
        loss = build()
    tape.backward(loss)
    return [t.grad for t in tensors]


def test_backward_sum_gives_ones():
    x = Tensor([1.0, 2.0, 3.0])
    (g,) = _grad_of(lambda: ad.reduce_sum(x), x)
    assert np.allclose(g, [1.0, 1.0, 1.0])


def test_backward_sum_of_squares():
    x = Tensor([1.0, 2.0])
    (g,) = _grad_of(lambda: ad.reduce_sum(ad.mul(x, x)), x)
    assert np.allclose(g, [2.0, 4.0])


def test_backward_logsumexp_is_softmax():
    x = Tensor([0.0, 0.0])
    (g,) = _grad_of(lambda: ad.logsumexp(x), x)
    assert np.allclose(g, [0.5, 0.5])


def test_multi_consumer_node_sums_contributions():
    # y = sum(x) + sum(x * x): x feeds two consumers, so dy/dx = 1 + 2x.
    x = Tensor([1.0, -2.0, 0.5])
    (g,) = _grad_of(
        lambda: ad.add(ad.reduce_sum(x), ad.reduce_sum(ad.mul(x, x))), x)
    assert np.allclose(g, 1.0 + 2.0 * x.values)
    rep = grad_check(
        lambda: ad.add(ad.reduce_sum(x), ad.reduce_sum(ad.mul(x, x))), [x])
    assert rep.passed, rep


def test_backward_requires_scalar_loss():
    x = Tensor([1.0, 2.0])
    with Tape() as tape:
        y = ad.mul(x, x)
    with pytest.raises(ContractViolation):
        tape.backward(y)


def test_no_active_tape_is_pure_forward():
    x = Tensor([1.0, 2.0])
    y = ad.mul(x, x)
    assert np.allclose(y.values, [1.0, 4.0])
    assert x.grad is None and y.grad is None


def test_nonfinite_forward_raises():
    with pytest.raises(NumericOverflow):
        ad.exp(Tensor([1000.0]))
    with pytest.raises(NumericOverflow):
        ad.log(Tensor([0.0]))


def test_shape_mismatch_names_op():
    with pytest.raises(ContractViolation, match="add"):
        ad.add(Tensor([1.0, 2.0]), Tensor([1.0, 2.0, 3.0]))


# ---------------------------------------------------------------------------
# finite-difference sweep over the whole primitive catalog
# ---------------------------------------------------------------------------

def _project_to_scalar(out, seed):
    # fixed random projection so FD exercises every output coordinate
    w = Tensor(np.random.default_rng(seed).normal(size=out.shape))
    return ad.reduce_sum(ad.mul(out, w))


def _catalog(rng, seed):
    a = Tensor(rng.normal(size=(3, 4)))
    b = Tensor(rng.normal(size=(3, 4)))
    m = Tensor(rng.normal(size=(4, 2)))
    v = Tensor(rng.uniform(0.5, 2.0, size=(4,)))
    w = Tensor(rng.normal(size=(3,)))
    return [
        ("matmul", [a, m], lambda: ad.matmul(a, m)),
        ("add", [a, b], lambda: ad.add(a, b)),
        ("sub", [a, b], lambda: ad.sub(a, b)),
        ("mul", [a, b], lambda: ad.mul(a, b)),
        ("scalar_mul", [a], lambda: ad.scalar_mul(a, -1.7)),
        ("scalar_add", [a], lambda: ad.scalar_add(a, 0.3)),
        ("tanh", [a], lambda: ad.tanh(a)),
        ("sigmoid", [a], lambda: ad.sigmoid(a)),
        ("exp", [a], lambda: ad.exp(a)),
        ("log", [v], lambda: ad.log(v)),
        ("logsumexp_flat", [a], lambda: ad.logsumexp(a)),
        ("logsumexp_axis", [a], lambda: ad.logsumexp(a, axis=1)),
        ("softmax", [a], lambda: ad.softmax(a, axis=1, alpha=2.3)),
        ("squared_diff", [a], lambda: ad.squared_diff(a, 0.4)),
        ("concat", [a, b], lambda: ad.concat([a, b], axis=0)),
        ("stack", [w, w], lambda: ad.stack([w, ad.tanh(w)])),
        ("rows_repeat", [a], lambda: ad.rows(a, [0, 2, 0])),
        ("weighted_sum_vec", [w, w], lambda: ad.weighted_sum(w, ad.tanh(w))),
        ("weighted_sum_mat", [w, a], lambda: ad.weighted_sum(w, a)),
        ("sum_axis", [a], lambda: ad.reduce_sum(a, axis=0)),
        ("mean_flat", [a], lambda: ad.reduce_mean(a)),
        ("mean_axis", [a], lambda: ad.reduce_mean(a, axis=1)),
        ("reshape", [a], lambda: ad.reshape(a, (4, 3))),
    ]


@pytest.mark.parametrize("draw", range(8))
def test_every_primitive_matches_finite_differences(draw):
    rng = np.random.default_rng(100 + draw)
    for name, params, build in _catalog(rng, seed=draw):
        rep = grad_check(lambda: _project_to_scalar(build(), seed=draw),
                         params, rel_tol=1e-4)
        assert rep.passed, f"{name}: {rep}"


# ---------------------------------------------------------------------------
# grad_check harness behaviour
# ---------------------------------------------------------------------------


def test_grad_check_quadratic_is_nearly_exact():
    x = Tensor([0.3, -1.2, 2.0])
    rep = grad_check(lambda: ad.reduce_sum(ad.mul(x, x)), [x], epsilon=1e-5)
    assert rep.passed and rep.max_rel_error < 1e-6


def test_grad_check_rejects_nondeterministic_f():
    x = Tensor([1.0])
    state = {"n": 0.0}

    def f():
        state["n"] += 1.0
        return ad.scalar_add(ad.reduce_sum(x), state["n"])

    with pytest.raises(ProtocolError):
        grad_check(f, [x])


def test_grad_check_epsilon_bounds():
    x = Tensor([1.0])
    with pytest.raises(ContractViolation):
        grad_check(lambda: ad.reduce_sum(x), [x], epsilon=1e-2)


def test_grad_check_coordinate_subsample_still_passes():
    x = Tensor(np.random.default_rng(3).normal(size=(6, 6)))
    rep = grad_check(lambda: ad.reduce_sum(ad.mul(x, x)), [x], max_coords=5)
    assert rep.passed


# ---------------------------------------------------------------------------
# hypothesis properties
# ---------------------------------------------------------------------------

finite_rows = st.lists(
    st.floats(min_value=-50, max_value=50, allow_nan=False),
    min_size=2, max_size=6)


@settings(max_examples=60, deadline=None)
@given(xs=finite_rows, alpha=st.floats(min_value=1e-3, max_value=1e3))
def test_softmax_rows_are_distributions(xs, alpha):
    out = ad.softmax(Tensor(xs), alpha=alpha).values
    assert np.all(out >= 0)
    assert abs(out.sum() - 1.0) < 1e-9


@settings(max_examples=60, deadline=None)
@given(xs=finite_rows, c=st.floats(min_value=-100, max_value=100,
                                   allow_nan=False))
def test_logsumexp_shift_invariance(xs, c):
    base = ad.logsumexp(Tensor(xs)).item()
    shifted = ad.logsumexp(Tensor([x + c for x in xs])).item()
    assert abs(shifted - (base + c)) < 1e-9


@settings(max_examples=40, deadline=None)
@given(xs=st.lists(st.floats(min_value=-5, max_value=5, allow_nan=False),
                   min_size=2, max_size=5))
def test_local_normalization_is_idempotent(xs):
    logp = ad.sub(Tensor(xs), ad.logsumexp(Tensor(xs)))
    assert abs(ad.logsumexp(logp).item()) < 1e-9
