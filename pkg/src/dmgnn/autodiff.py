"""Reverse-mode automatic differentiation over dense 1-D/2-D tensors.

A :class:`Tape` records primitive operations while active; calling
``tape.backward(loss)`` sweeps the record in reverse and accumulates
gradients into every tensor that requires them. With no tape active the
ops just compute values (eval mode), which skips all bookkeeping.
"""

import numpy as np

from .backend import kernels as K


class ShapeError(ValueError):
    pass


class NumericError(ValueError):
    pass


_TAPE_STACK = []


def _active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class Tensor:
    """Dense float64 matrix with an optional gradient slot.

    1-D input is promoted to a single row; scalars are 1x1.
    """

    __slots__ = ("data", "grad", "requires_grad", "_needs_grad")

    def __init__(self, data, requires_grad=False):
        arr = np.array(data, dtype=np.float64, copy=True, order="C")
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"tensors are at most 2-D, got ndim={arr.ndim}")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._needs_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() on non-scalar tensor of shape {self.shape}")
        return float(self.data[0, 0])

    def grad_view(self):
        """Gradient as an array; zeros if nothing flowed here."""
        if self.grad is None:
            return np.zeros_like(self.data)
        return self.grad

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        K.accumulate(self.grad, g)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Ordered record of primitive ops; context manager activates it."""

    def __init__(self):
        self._ops = []

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc):
        _TAPE_STACK.pop()
        return False

    def __len__(self):
        return len(self._ops)

    def backward(self, loss):
        """Reverse sweep from a scalar loss.

        Gradients of leaf tensors accumulate across calls; intermediate
        (op-output) gradients are rebuilt fresh each sweep.
        """
        if loss.data.size != 1:
            raise ShapeError(f"backward root must be scalar, got shape {loss.shape}")
        for out, _ in self._ops:
            out.grad = None
        loss._accumulate(np.ones((1, 1)))
        for out, backward_fn in reversed(self._ops):
            if out.grad is not None:
                backward_fn(out.grad)


def _record(out, parents, backward_fn):
    out._needs_grad = any(p._needs_grad for p in parents)
    tape = _active_tape()
    if tape is not None and out._needs_grad:
        tape._ops.append((out, backward_fn))
    return out



def _from_array(arr):
    # internal op-output constructor: takes ownership, no copy
    t = Tensor.__new__(Tensor)
    t.data = arr
    t.grad = None
    t.requires_grad = False
    t._needs_grad = False
    return t

def zero_grads(tensors):
    for t in tensors:
        t.zero_grad()


# ---------------------------------------------------------------------------
# primitives


def matmul(a, b):
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dims disagree: {a.shape} x {b.shape}")
    out = _from_array(K.matmul(a.data, b.data))

    def backward(g):
        if a._needs_grad:
            a._accumulate(K.matmul_bwd_a(g, b.data))
        if b._needs_grad:
            b._accumulate(K.matmul_bwd_b(a.data, g))

    return _record(out, (a, b), backward)


def transpose(a):
    out = _from_array(np.ascontiguousarray(a.data.T))

    def backward(g):
        if a._needs_grad:
            a._accumulate(np.ascontiguousarray(g.T))

    return _record(out, (a,), backward)


def concat(parts, axis):
    if not parts:
        raise ShapeError("concat of empty list")
    if axis not in (0, 1):
        raise ShapeError(f"concat axis must be 0 or 1, got {axis}")
    other = 1 - axis
    base = parts[0].shape[other]
    for p in parts[1:]:
        if p.shape[other] != base:
            raise ShapeError(
                f"concat non-axis dims disagree: {parts[0].shape} vs {p.shape}"
            )
    out = _from_array(np.concatenate([p.data for p in parts], axis=axis))
    extents = [p.shape[axis] for p in parts]

    def backward(g):
        offset = 0
        for p, ext in zip(parts, extents):
            if p._needs_grad:
                if axis == 0:
                    p._accumulate(np.ascontiguousarray(g[offset : offset + ext, :]))
                else:
                    p._accumulate(np.ascontiguousarray(g[:, offset : offset + ext]))
            offset += ext

    return _record(out, tuple(parts), backward)


def _check_same_shape(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op} operand shapes disagree: {a.shape} vs {b.shape}")


def add(a, b):
    _check_same_shape(a, b, "add")
    out = _from_array(K.add(a.data, b.data))

    def backward(g):
        if a._needs_grad:
            a._accumulate(g)
        if b._needs_grad:
            b._accumulate(g)

    return _record(out, (a, b), backward)


def hadamard(a, b):
    _check_same_shape(a, b, "hadamard")
    out = _from_array(K.hadamard(a.data, b.data))

    def backward(g):
        if a._needs_grad:
            a._accumulate(K.hadamard(g, b.data))
        if b._needs_grad:
            b._accumulate(K.hadamard(g, a.data))

    return _record(out, (a, b), backward)


def scale(a, s):
    s = float(s)
    out = _from_array(K.scale(a.data, s))

    def backward(g):
        if a._needs_grad:
            a._accumulate(K.scale(g, s))

    return _record(out, (a,), backward)


def sub(a, b):
    return add(a, scale(b, -1.0))


def add_bias(a, bias):
    """Row-broadcast bias addition: a is m x n, bias is 1 x n."""
    if bias.shape != (1, a.shape[1]):
        raise ShapeError(f"bias shape {bias.shape} does not fit {a.shape}")
    out = _from_array(a.data + bias.data)

    def backward(g):
        if a._needs_grad:
            a._accumulate(g)
        if bias._needs_grad:
            bias._accumulate(g.sum(axis=0, keepdims=True))

    return _record(out, (a, bias), backward)


def gather_rows(a, indices):
    """Row gather: out[r] = a[indices[r]]; backward scatter-adds."""
    idx = np.asarray(indices, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise ShapeError(f"gather index out of range for {a.shape[0]} rows")
    out = _from_array(a.data[idx])

    def backward(g):
        if a._needs_grad:
            buf = np.zeros_like(a.data)
            np.add.at(buf, idx, g)
            a._accumulate(buf)

    return _record(out, (a,), backward)


def segment_sum(a, segment_ids, n_segments):
    """Sum rows of a into n_segments buckets; backward gathers."""
    seg = np.asarray(segment_ids, dtype=np.intp)
    if seg.shape != (a.shape[0],):
        raise ShapeError(
            f"segment_ids length {seg.shape} does not match {a.shape[0]} rows"
        )
    if seg.size and (seg.min() < 0 or seg.max() >= n_segments):
        raise ShapeError(f"segment id out of range for {n_segments} segments")
    buf = np.zeros((n_segments, a.shape[1]))
    np.add.at(buf, seg, a.data)
    out = _from_array(buf)

    def backward(g):
        if a._needs_grad:
            a._accumulate(np.ascontiguousarray(g[seg]))

    return _record(out, (a,), backward)


def tanh(a):
    y = K.tanh_fwd(a.data)
    out = _from_array(y)

    def backward(g):
        if a._needs_grad:
            a._accumulate(K.tanh_bwd(y, g))

    return _record(out, (a,), backward)


def relu(a):
    out = _from_array(K.relu_fwd(a.data))

    def backward(g):
        if a._needs_grad:
            a._accumulate(K.relu_bwd(a.data, g))

    return _record(out, (a,), backward)


def logistic(a):
    y = K.sigmoid_fwd(a.data)
    out = _from_array(y)

    def backward(g):
        if a._needs_grad:
            a._accumulate(K.sigmoid_bwd(y, g))

    return _record(out, (a,), backward)


def softmax(a):
    if a.shape[0] != 1 or a.shape[1] < 1:
        raise ShapeError(f"softmax expects a 1xN row, got {a.shape}")
    if not np.isfinite(a.data).all():
        raise NumericError("softmax input contains NaN/Inf")
    y = K.softmax_row(a.data)
    out = _from_array(y)

    def backward(g):
        if a._needs_grad:
            a._accumulate(K.softmax_bwd(y, g))

    return _record(out, (a,), backward)


def cross_entropy(logits, label):
    """-log softmax(logits)[label], computed in log-space."""
    n = logits.shape[1]
    if logits.shape[0] != 1:
        raise ShapeError(f"cross_entropy expects a 1xN row, got {logits.shape}")
    if not 0 <= label < n:
        raise ShapeError(f"label {label} out of range for {n} logits")
    x = logits.data[0]
    m = x.max()
    lse = m + np.log(np.exp(x - m).sum())
    out = _from_array(np.array([[lse - x[label]]]))

    def backward(g):
        if logits._needs_grad:
            p = np.exp(x - lse).reshape(1, -1)
            p[0, label] -= 1.0
            logits._accumulate(K.scale(p, float(g[0, 0])))

    return _record(out, (logits,), backward)


def sum_all(a):
    out = _from_array(np.array([[a.data.sum()]]))

    def backward(g):
        if a._needs_grad:
            a._accumulate(np.full_like(a.data, float(g[0, 0])))

    return _record(out, (a,), backward)


# ---------------------------------------------------------------------------
# verification harness


def finite_diff_check(f, params, eps=1e-5):
    """Max relative error between analytic and central-difference gradients.

    ``f`` is a zero-argument callable returning the scalar loss tensor; it
    must be deterministic and close over ``params`` (a name->Tensor map).
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    tensors = list(params.values())
    zero_grads(tensors)
    with Tape() as tape:
        loss = f()
    if not np.isfinite(loss.item()):
        raise NumericError("loss is not finite")
    tape.backward(loss)
    analytic = {name: p.grad_view().copy() for name, p in params.items()}

    def value():
        out = f().item()
        if not np.isfinite(out):
            raise NumericError("loss is not finite during perturbation")
        return out

    max_rel = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        grad = analytic[name].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            f_plus = value()
            flat[idx] = orig - eps
            f_minus = value()
            flat[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = grad[idx]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if rel > max_rel:
                max_rel = rel
    return max_rel
