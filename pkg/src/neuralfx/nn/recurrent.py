"""Recurrent cells (vanilla RNN, LSTM, GRU) as tape ops.

Weights follow one layout for every cell kind: ``W [G*H, in]``, ``U [G*H, H]``
and a single bias ``b [G*H]`` per gate (no separate input/hidden biases), with
gate order rnn ``[a]``, lstm ``[i, f, g, o]``, gru ``[z, r, n]``.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..errors import ShapeMismatch
from .ops import linear
from .tape import Tensor, as_tensor, record

GATES = kernels.GATES


def cell_param_count(kind, n_in, hidden):
    g = GATES[kind]
    return g * (n_in * hidden + hidden * hidden + hidden)


def _check(kind, P, U, b):
    H = U.shape[1]
    G = GATES[kind]
    if U.shape != (G * H, H) or b.shape != (G * H,) or P.shape[-1] != G * H:
        raise ShapeMismatch(f"{kind}: P {P.shape}, U {U.shape}, b {b.shape}")
    return H


def rnn_sequence(kind, P, U, b, h0=None, c0=None):
    """Run a cell over precomputed input projections ``P [T, G*H]``.

    Returns ``(hs, h_T, c_T)``: the hidden sequence as a Tensor and the final
    states as plain arrays (state carried across truncations is detached).
    """
    P, U, b = as_tensor(P), as_tensor(U), as_tensor(b)
    H = _check(kind, P, U, b)
    dt = P.dtype
    h0 = np.zeros(H, dtype=dt) if h0 is None else np.asarray(h0, dtype=dt)
    c0 = np.zeros(H, dtype=dt) if c0 is None else np.asarray(c0, dtype=dt)
    hs, cs, gates, uh = kernels.seq_forward(kind, P.data, h0, c0, U.data.astype(dt), b.data.astype(dt))
    out = Tensor(hs)

    def backward(g):
        dP, dU, db = kernels.seq_backward(kind, np.ascontiguousarray(g, dtype=dt), h0, c0,
                                          hs, cs, gates, uh, U.data.astype(dt))
        return dP, dU, db

    record([out], [P, U, b], backward)
    if len(hs):
        return out, hs[-1].copy(), cs[-1].copy()
    return out, h0, c0


def cell_step(kind, p, h, c, U, b, s=None):
    """One differentiable step with optional per-row scale ``s`` on ``U @ h``.

    ``h`` and ``c`` may be Tensors so gradients flow across steps. Returns
    ``(h_new, c_new)`` Tensors.
    """
    p, h, c, U, b = (as_tensor(t) for t in (p, h, c, U, b))
    _check(kind, p, U, b)
    dt = p.dtype
    s = as_tensor(np.ones(p.shape, dtype=dt) if s is None else s)
    h_new, c_new, gates, uh = kernels.step_forward(kind, p.data, h.data, c.data, U.data, b.data, s.data)
    oh, oc = Tensor(h_new), Tensor(c_new)

    def backward(gh, gc):
        da, dh, dc, ds, dU = kernels.step_backward(
            kind, gh, gc, h.data, c.data, c_new, h_new, gates, uh, U.data, s.data)
        return da, dh, dc, dU, da, ds

    record([oh, oc], [p, h, c, U, b, s], backward)
    return oh, oc


def _single_step(kind, x, h, W, U, b, c=None):
    p = linear(x, W)
    c = np.zeros(np.shape(as_tensor(h).data), dtype=p.dtype) if c is None else c
    return cell_step(kind, p, h, c, U, b)


def vanilla_rnn_cell(x, h, W, U, b):
    """``h' = tanh(W x + U h + b)``."""
    return _single_step("rnn", x, h, W, U, b)[0]


def gru_cell(x, h, W, U, b):
    return _single_step("gru", x, h, W, U, b)[0]


def lstm_cell(x, h, c, W, U, b):
    """Returns ``(h', c')``."""
    return _single_step("lstm", x, h, W, U, b, c)
