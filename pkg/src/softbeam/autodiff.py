"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

All values live in `Tensor` objects wrapping numpy arrays.  Primitive
operations run eagerly; when a `Tape` is active they record a backward rule,
and `Tape.backward(loss)` sweeps the recorded ops once in reverse creation
order (creation order is already topological) accumulating gradients.

Tapes are per-training-step: build one, compute the loss inside it, call
backward, throw it away.  With no active tape every op is pure forward
computation, which is what decoding and evaluation use.

Every forward result is checked for NaN/Inf and aborts with
`NumericOverflow` instead of propagating, so schedule bugs surface early.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ContractViolation, NumericOverflow, ProtocolError

Array = np.ndarray

_ACTIVE_TAPES: list["Tape"] = []


class Tensor:
    """A dense float64 n-dimensional value with a lazily allocated gradient.

    `node_id` is the identifier of this tensor on the most recent tape it was
    recorded on (-1 if never recorded).
    """

    __slots__ = ("values", "grad", "node_id")

    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad: Array | None = None
        self.node_id: int = -1

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        if self.values.size != 1:
            raise ContractViolation(f"item() on tensor of shape {self.shape}")
        return float(self.values.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Tensor(shape={self.shape}, values={self.values!r})"


def constant(values) -> Tensor:
    """A tensor that participates in ops but is not meant to receive grads."""
    return Tensor(values)


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=np.float64))


@dataclass
class _Recorded:
    kind: str
    input_ids: tuple[int, ...]
    output_id: int
    # maps the output gradient to one gradient (or None) per input
    backward: Callable[[Array], Sequence[Array | None]]


class Tape:
    """Ordered record of primitive ops for one backward pass.

    Ops are appended in execution order, so every op's inputs precede it on
    the tape; backward is a single reversed sweep that visits each node once
    and sums gradient contributions from all consumers.
    """

    def __init__(self):
        self._ops: list[_Recorded] = []
        self._tensors: list[Tensor] = []    # node_id -> Tensor (keeps ids stable)
        self._ids: dict[int, int] = {}      # id(tensor) -> node_id

    def __enter__(self) -> "Tape":
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        popped = _ACTIVE_TAPES.pop()
        assert popped is self

    def __len__(self) -> int:
        return len(self._ops)

    def _node(self, t: Tensor) -> int:
        nid = self._ids.get(id(t))
        if nid is None:
            nid = len(self._tensors)
            self._ids[id(t)] = nid
            self._tensors.append(t)
            t.node_id = nid
        return nid

    def _record(self, kind: str, inputs: Sequence[Tensor], output: Tensor,
                backward: Callable[[Array], Sequence[Array | None]]) -> None:
        in_ids = tuple(self._node(t) for t in inputs)
        out_id = self._node(output)
        self._ops.append(_Recorded(kind, in_ids, out_id, backward))

    def backward(self, loss: Tensor) -> dict[int, Array]:
        """Populate `.grad` of every tensor on the tape; return node_id->grad.

        Gradients on leaf tensors accumulate across calls (useful for
        mini-batch accumulation); call `zero_grad` between updates.
        """
        if loss.values.size != 1:
            raise ContractViolation(
                f"backward needs a scalar loss, got shape {loss.shape}")
        loss_id = self._ids.get(id(loss))
        if loss_id is None:
            raise ContractViolation("loss was not produced on this tape")

        grads: list[Array | None] = [None] * len(self._tensors)
        grads[loss_id] = np.ones_like(loss.values)
        produced = {op.output_id for op in self._ops}

        for op in reversed(self._ops):
            g_out = grads[op.output_id]
            if g_out is None:
                continue
            in_grads = op.backward(g_out)
            for nid, g in zip(op.input_ids, in_grads):
                if g is None:
                    continue
                if grads[nid] is None:
                    grads[nid] = np.array(g, dtype=np.float64, copy=True)
                else:
                    grads[nid] += g

        out: dict[int, Array] = {}
        for nid, tensor in enumerate(self._tensors):
            g = grads[nid]
            if g is None:
                g = np.zeros_like(tensor.values)
            out[nid] = g
            if nid in produced:
                tensor.grad = g            # intermediates: fresh grad
            elif tensor.grad is None:
                tensor.grad = g.copy()     # leaves: accumulate across calls
            else:
                tensor.grad += g
        return out


def _active() -> Tape | None:
    return _ACTIVE_TAPES[-1] if _ACTIVE_TAPES else None


def _finish(kind: str, inputs: Sequence[Tensor], out_values: Array,
            backward: Callable[[Array], Sequence[Array | None]]) -> Tensor:
    if not np.all(np.isfinite(out_values)):
        raise NumericOverflow(f"non-finite values produced by op '{kind}'")
    out = Tensor(out_values)
    tape = _active()
    if tape is not None:
        tape._record(kind, inputs, out, backward)
    return out


def _same_or_scalar(kind: str, a: Tensor, b: Tensor) -> None:
    # elementwise ops allow equal shapes, or a 0-d operand broadcast over the other
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise ContractViolation(
            f"op '{kind}': incompatible shapes {a.shape} vs {b.shape}")


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    return np.sum(g) if shape == () else g


# ---------------------------------------------------------------------------
# primitive catalog
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _same_or_scalar("add", a, b)
    sa, sb = a.shape, b.shape

    def bwd(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return _finish("add", (a, b), a.values + b.values, bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_or_scalar("sub", a, b)
    sa, sb = a.shape, b.shape

    def bwd(g):
        return _unbroadcast(g, sa), -_unbroadcast(g, sb)

    return _finish("sub", (a, b), a.values - b.values, bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_or_scalar("mul", a, b)
    av, bv = a.values, b.values

    def bwd(g):
        return _unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)

    return _finish("mul", (a, b), av * bv, bwd)


def scalar_mul(a: Tensor, c: float) -> Tensor:
    c = float(c)
    if not np.isfinite(c):
        raise ContractViolation("scalar_mul: attr must be finite")

    def bwd(g):
        return (g * c,)

    return _finish("scalar_mul", (a,), a.values * c, bwd)


def scalar_add(a: Tensor, c: float) -> Tensor:
    c = float(c)
    if not np.isfinite(c):
        raise ContractViolation("scalar_add: attr must be finite")

    def bwd(g):
        return (g,)

    return _finish("scalar_add", (a,), a.values + c, bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix/vector product for 1-D and 2-D operands (numpy `@` semantics)."""
    av, bv = a.values, b.values
    if av.ndim == 0 or bv.ndim == 0 or av.ndim > 2 or bv.ndim > 2:
        raise ContractViolation(
            f"op 'matmul': operands must be 1-D or 2-D, got {a.shape} @ {b.shape}")
    if av.shape[-1] != bv.shape[0]:
        raise ContractViolation(
            f"op 'matmul': inner dims differ, {a.shape} @ {b.shape}")

    def bwd(g):
        if av.ndim == 2 and bv.ndim == 2:
            return g @ bv.T, av.T @ g
        if av.ndim == 2 and bv.ndim == 1:
            return np.outer(g, bv), av.T @ g
        if av.ndim == 1 and bv.ndim == 2:
            return bv @ g, np.outer(av, g)
        return g * bv, g * av  # dot product, g is 0-d

    return _finish("matmul", (a, b), av @ bv, bwd)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.values)

    def bwd(g):
        return (g * (1.0 - out * out),)

    return _finish("tanh", (a,), out, bwd)


def sigmoid(a: Tensor) -> Tensor:
    # 0.5*(1+tanh(x/2)) is stable for large |x|
    out = 0.5 * (1.0 + np.tanh(0.5 * a.values))

    def bwd(g):
        return (g * out * (1.0 - out),)

    return _finish("sigmoid", (a,), out, bwd)


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(a.values)

    def bwd(g):
        return (g * out,)

    return _finish("exp", (a,), out, bwd)


def log(a: Tensor) -> Tensor:
    av = a.values
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(av)

    def bwd(g):
        return (g / av,)

    return _finish("log", (a,), out, bwd)


def logsumexp(a: Tensor, axis: int | None = None) -> Tensor:
    """Max-subtracted log-sum-exp over `axis` (all entries if None)."""
    av = a.values
    m = np.max(av, axis=axis, keepdims=True)
    out = np.squeeze(m, axis=axis) if axis is not None else m.reshape(())
    sumexp = np.sum(np.exp(av - m), axis=axis, keepdims=True)
    out = out + (np.squeeze(np.log(sumexp), axis=axis)
                 if axis is not None else np.log(sumexp).reshape(()))
    soft = np.exp(av - m) / sumexp

    def bwd(g):
        ge = np.expand_dims(g, axis) if axis is not None else g
        return (soft * ge,)

    return _finish("logsumexp", (a,), out, bwd)


def softmax(a: Tensor, axis: int = -1, alpha: float = 1.0) -> Tensor:
    """softmax(alpha * a) along `axis`, computed max-subtracted.

    `alpha` is an inverse temperature; weights are formed in log space and
    exponentiated, so very large `alpha` saturates cleanly instead of
    overflowing.
    """
    alpha = float(alpha)
    if not np.isfinite(alpha):
        raise ContractViolation("softmax: alpha must be finite")
    z = alpha * a.values
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def bwd(g):
        inner = np.sum(g * out, axis=axis, keepdims=True)
        return (alpha * out * (g - inner),)

    return _finish("softmax", (a,), out, bwd)


def squared_diff(a: Tensor, center: float) -> Tensor:
    """(a - center)^2 elementwise against a broadcast scalar attr."""
    center = float(center)
    if not np.isfinite(center):
        raise ContractViolation("squared_diff: center must be finite")
    d = a.values - center

    def bwd(g):
        return (2.0 * d * g,)

    return _finish("squared_diff", (a,), d * d, bwd)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ContractViolation("concat: need at least one input")
    sizes = [t.values.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return np.split(g, splits, axis=axis)

    return _finish("concat", tuple(tensors),
                   np.concatenate([t.values for t in tensors], axis=axis), bwd)


def stack(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate equal-shape tensors along a new leading axis."""
    if not tensors:
        raise ContractViolation("stack: need at least one input")
    shape = tensors[0].shape
    for t in tensors:
        if t.shape != shape:
            raise ContractViolation(
                f"op 'stack': mixed shapes {shape} vs {t.shape}")

    def bwd(g):
        return [g[k] for k in range(len(tensors))]

    return _finish("stack", tuple(tensors),
                   np.stack([t.values for t in tensors], axis=0), bwd)


def rows(a: Tensor, index) -> Tensor:
    """Row selection / embedding lookup with numpy fancy-index semantics.

    An int index drops the leading axis (matrix -> row vector,
    vector -> scalar); a sequence of ints keeps it.  Gradient scatter-adds
    into the source, so repeated indices accumulate.
    """
    av = a.values
    if av.ndim == 0:
        raise ContractViolation("op 'rows': input must have at least 1 axis")
    idx = int(index) if np.isscalar(index) else np.asarray(index, dtype=np.intp)
    n = av.shape[0]
    flat = np.atleast_1d(idx)
    if np.any(flat < 0) or np.any(flat >= n):
        raise ContractViolation(
            f"op 'rows': index out of range for leading axis of size {n}")

    def bwd(g):
        acc = np.zeros_like(av)
        np.add.at(acc, idx, g)
        return (acc,)

    return _finish("rows", (a,), av[idx], bwd)


def weighted_sum(weights: Tensor, items: Tensor) -> Tensor:
    """Convex/affine combination: sum_k weights[k] * items[k].

    items may be (K,) (returns a scalar) or (K, d) (returns a d-vector).
    """
    wv, iv = weights.values, items.values
    if wv.ndim != 1 or iv.ndim not in (1, 2) or wv.shape[0] != iv.shape[0]:
        raise ContractViolation(
            f"op 'weighted_sum': bad shapes {weights.shape}, {items.shape}")

    def bwd(g):
        if iv.ndim == 1:
            return g * iv, g * wv
        return iv @ g, np.outer(wv, g)

    return _finish("weighted_sum", (weights, items), wv @ iv, bwd)


def reduce_sum(a: Tensor, axis: int | None = None) -> Tensor:
    shape = a.shape

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _finish("sum", (a,), np.sum(a.values, axis=axis), bwd)


def reduce_mean(a: Tensor, axis: int | None = None) -> Tensor:
    shape = a.shape
    count = a.values.size if axis is None else shape[axis]

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g / count, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis) / count, shape).copy(),)

    return _finish("mean", (a,), np.mean(a.values, axis=axis), bwd)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = a.shape

    def bwd(g):
        return (g.reshape(old),)

    return _finish("reshape", (a,), a.values.reshape(shape), bwd)


def mismatch_mask(size: int, hot: int) -> Tensor:
    """Constant 0/1 vector: 0 at `hot`, 1 elsewhere (non-differentiable)."""
    if not 0 <= hot < size:
        raise ContractViolation(f"mismatch_mask: index {hot} out of range {size}")
    v = np.ones(size, dtype=np.float64)
    v[hot] = 0.0
    return Tensor(v)


_PRIMITIVES: dict[str, Callable] = {
    "matmul": matmul, "add": add, "sub": sub, "mul": mul,
    "scalar_mul": scalar_mul, "scalar_add": scalar_add,
    "tanh": tanh, "sigmoid": sigmoid, "exp": exp, "log": log,
    "logsumexp": logsumexp, "softmax": softmax, "squared_diff": squared_diff,
    "concat": concat, "stack": stack, "rows": rows,
    "weighted_sum": weighted_sum, "sum": reduce_sum, "mean": reduce_mean,
    "reshape": reshape,
}


def apply(kind: str, inputs: Sequence[Tensor], **attrs) -> Tensor:
    """Generic dispatch into the primitive catalog by op name."""
    fn = _PRIMITIVES.get(kind)
    if fn is None:
        raise ContractViolation(f"unknown primitive op '{kind}'")
    if kind in ("concat", "stack"):
        return fn(inputs, **attrs)
    return fn(*inputs, **attrs)


def backward(loss: Tensor, tape: Tape) -> dict[int, Array]:
    """Free-function form of `Tape.backward`."""
    return tape.backward(loss)


def zero_grads(tensors: Sequence[Tensor]) -> None:
    for t in tensors:
        t.grad = None


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: int          # index into the params list
    worst_coord: tuple[int, ...]
    analytic: float
    numeric: float
    passed: bool


def grad_check(f: Callable[[], Tensor], params: Sequence[Tensor],
               epsilon: float = 1e-5, rel_tol: float = 1e-4,
               max_coords: int | None = None,
               seed: int = 0) -> GradCheckReport:
    """Compare analytic gradients of `f` against central finite differences.

    `f` is a zero-argument callable (closing over `params`) returning a
    scalar Tensor; it must be deterministic.  The error for a coordinate is
    |analytic - numeric| / max(1, |analytic|, |numeric|), so tiny gradients
    are judged on absolute error; the report carries the worst coordinate.
    `max_coords` caps the coordinates checked per tensor (a seeded uniform
    sample); by default every coordinate is checked.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ContractViolation(f"epsilon {epsilon} outside [1e-7, 1e-3]")

    zero_grads(params)
    with Tape() as tape:
        loss = f()
    base = loss.item()
    tape.backward(loss)
    analytic = [np.zeros_like(p.values) if p.grad is None else p.grad.copy()
                for p in params]
    zero_grads(params)

    if f().item() != base:
        raise ProtocolError("grad_check: f is not deterministic")

    coord_rng = np.random.default_rng(seed)
    worst = GradCheckReport(0.0, -1, (), 0.0, 0.0, True)
    for pi, p in enumerate(params):
        flat = p.values.reshape(-1)
        if max_coords is not None and flat.size > max_coords:
            coords = coord_rng.choice(flat.size, size=max_coords,
                                      replace=False)
        else:
            coords = range(flat.size)
        for ci in coords:
            orig = flat[ci]
            flat[ci] = orig + epsilon
            f_plus = f().item()
            flat[ci] = orig - epsilon
            f_minus = f().item()
            flat[ci] = orig
            num = (f_plus - f_minus) / (2.0 * epsilon)
            ana = float(analytic[pi].reshape(-1)[ci])
            err = abs(ana - num) / max(1.0, abs(ana), abs(num))
            if err > worst.max_rel_error:
                coord = np.unravel_index(ci, p.values.shape)
                worst = GradCheckReport(err, pi, tuple(int(c) for c in coord),
                                        ana, num, True)
    worst.passed = worst.max_rel_error < rel_tol
    return worst
