"""Pure-numpy fallback for the compiled kernels.

Same call surface as the Cython module ``dmgnn._kernels``; selected by
``dmgnn.backend`` when the extension is unavailable (or forced via the
DMGNN_PURE_PYTHON environment variable).
"""

import numpy as np

COMPILED = False


def matmul(a, b):
    return a @ b


def matmul_bwd_a(gc, b):
    return gc @ b.T


def matmul_bwd_b(a, gc):
    return a.T @ gc


def add(a, b):
    return a + b


def hadamard(a, b):
    return a * b


def scale(a, s):
    return a * s


def tanh_fwd(x):
    return np.tanh(x)


def tanh_bwd(y, gy):
    return gy * (1.0 - y * y)


def relu_fwd(x):
    return np.maximum(x, 0.0)


def relu_bwd(x, gy):
    return np.where(x > 0.0, gy, 0.0)


def sigmoid_fwd(x):
    # two-branch form avoids overflow in exp for large |x|
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_bwd(y, gy):
    return gy * y * (1.0 - y)


def softmax_row(x):
    shifted = x - x.max()
    ex = np.exp(shifted)
    return ex / ex.sum()


def softmax_bwd(y, gy):
    dot = float((gy * y).sum())
    return y * (gy - dot)


def accumulate(dst, src):
    dst += src
