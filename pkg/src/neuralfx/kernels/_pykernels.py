"""Pure numpy implementations of the sample-loop kernels.

These define the reference arithmetic; ``_ckernels.pyx`` mirrors them.
Recurrent cells take a precomputed input projection ``p`` (gate rows), so a
step only adds the hidden-to-hidden product ``s * (U @ h)`` and the bias.
``s`` is a per-row scale (all ones when the cell is not hyper-modulated).

Gate layouts: rnn ``[a]``, lstm ``[i, f, g, o]``, gru ``[z, r, n]``.
"""

import numpy as np
import scipy.signal

GATES = {"rnn": 1, "lstm": 4, "gru": 3}


def _sigmoid(a):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-a))


def step_forward(kind, p, h, c, U, b, s):
    """One recurrent step. Returns ``(h_new, c_new, gates, uh)``."""
    H = h.shape[0]
    if kind == "rnn":
        uh = U @ h
        h_new = np.tanh(p + s * uh + b)
        return h_new, c, h_new.copy(), uh
    if kind == "lstm":
        uh = U @ h
        a = p + s * uh + b
        gates = np.empty_like(a)
        gates[:2 * H] = _sigmoid(a[:2 * H])
        gates[2 * H:3 * H] = np.tanh(a[2 * H:3 * H])
        gates[3 * H:] = _sigmoid(a[3 * H:])
        i, f, g, o = gates[:H], gates[H:2 * H], gates[2 * H:3 * H], gates[3 * H:]
        c_new = f * c + i * g
        h_new = o * np.tanh(c_new)
        return h_new, c_new, gates, uh
    if kind == "gru":
        uh = np.empty(3 * H, dtype=h.dtype)
        uh[:2 * H] = U[:2 * H] @ h
        gates = np.empty(3 * H, dtype=h.dtype)
        gates[:2 * H] = _sigmoid(p[:2 * H] + s[:2 * H] * uh[:2 * H] + b[:2 * H])
        r = gates[H:2 * H]
        uh[2 * H:] = U[2 * H:] @ (r * h)
        gates[2 * H:] = np.tanh(p[2 * H:] + s[2 * H:] * uh[2 * H:] + b[2 * H:])
        z, n = gates[:H], gates[2 * H:]
        h_new = (1 - z) * h + z * n
        return h_new, c, gates, uh
    raise ValueError(f"unknown cell kind {kind!r}")


def step_backward(kind, dh_new, dc_new, h, c, c_new, h_new, gates, uh, U, s):
    """Backward of :func:`step_forward`.

    Returns ``(da, dh, dc, ds, dU)`` where ``da`` is the gradient wrt the
    gate pre-activations (equal to dp and db contributions).
    """
    H = h.shape[0]
    if kind == "rnn":
        da = dh_new * (1 - h_new * h_new)
        e = s * da
        return da, U.T @ e, dc_new, da * uh, np.outer(e, h)
    if kind == "lstm":
        i, f, g, o = gates[:H], gates[H:2 * H], gates[2 * H:3 * H], gates[3 * H:]
        tc = np.tanh(c_new)
        dc = dc_new + dh_new * o * (1 - tc * tc)
        da = np.concatenate([
            dc * g * i * (1 - i),
            dc * c * f * (1 - f),
            dc * i * (1 - g * g),
            dh_new * tc * o * (1 - o),
        ])
        e = s * da
        return da, U.T @ e, dc * f, da * uh, np.outer(e, h)
    if kind == "gru":
        z, r, n = gates[:H], gates[H:2 * H], gates[2 * H:]
        da = np.empty(3 * H, dtype=h.dtype)
        da_n = dh_new * z * (1 - n * n)
        e_n = s[2 * H:] * da_n
        rh = r * h
        drh = U[2 * H:].T @ e_n
        da[:H] = dh_new * (n - h) * z * (1 - z)
        da[H:2 * H] = drh * h * r * (1 - r)
        da[2 * H:] = da_n
        e_zr = s[:2 * H] * da[:2 * H]
        dh = dh_new * (1 - z) + drh * r + U[:2 * H].T @ e_zr
        dU = np.empty_like(U)
        dU[:2 * H] = np.outer(e_zr, h)
        dU[2 * H:] = np.outer(e_n, rh)
        return da, dh, dc_new, da * uh, dU
    raise ValueError(f"unknown cell kind {kind!r}")


def seq_forward(kind, P, h0, c0, U, b):
    """Run a cell over ``P`` (T x G*H). Returns ``(hs, cs, gates, uh)``."""
    T, H = P.shape[0], h0.shape[0]
    dt = P.dtype
    hs = np.empty((T, H), dtype=dt)
    cs = np.empty((T, H), dtype=dt)
    gates = np.empty(P.shape, dtype=dt)
    uh = np.empty(P.shape, dtype=dt)
    s = np.ones(P.shape[1], dtype=dt)
    h, c = h0, c0
    for t in range(T):
        h, c, gates[t], uh[t] = step_forward(kind, P[t], h, c, U, b, s)
        hs[t] = h
        cs[t] = c
    return hs, cs, gates, uh


def seq_backward(kind, dhs, h0, c0, hs, cs, gates, uh, U):
    """BPTT over a full sequence. Returns ``(dP, dU, db)``."""
    T, H = hs.shape
    dt = hs.dtype
    dP = np.empty(gates.shape, dtype=dt)
    dU = np.zeros(U.shape, dtype=dt)
    s = np.ones(gates.shape[1], dtype=dt)
    dh = np.zeros(H, dtype=dt)
    dc = np.zeros(H, dtype=dt)
    for t in range(T - 1, -1, -1):
        h_prev = hs[t - 1] if t else h0
        c_prev = cs[t - 1] if t else c0
        da, dh, dc, _, dUt = step_backward(
            kind, dhs[t] + dh, dc, h_prev, c_prev, cs[t], hs[t], gates[t], uh[t], U, s)
        dP[t] = da
        dU += dUt
    return dP, dU, dP.sum(axis=0)


def one_pole_lowpass(x, coeff):
    """``y[n] = (1 - coeff) x[n] + coeff y[n-1]`` with zero initial state."""
    return scipy.signal.lfilter([1.0 - coeff], [1.0, -coeff], x)


def peak_envelope(x_abs, attack, release):
    """One-pole peak follower switching coefficient on rising/falling input."""
    e = np.empty_like(x_abs)
    prev = 0.0
    for n, v in enumerate(x_abs):
        a = attack if v > prev else release
        prev = a * prev + (1.0 - a) * v
        e[n] = prev
    return e


def biquad(x, b0, b1, b2, a1, a2):
    """Direct-form biquad with ``a0 == 1`` and zero initial state."""
    return scipy.signal.lfilter([b0, b1, b2], [1.0, a1, a2], x)
