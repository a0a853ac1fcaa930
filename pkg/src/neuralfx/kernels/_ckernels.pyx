# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of ``_pykernels``. Same signatures, same arithmetic order
within this backend: the sequence kernels call the very step routines that
the per-step entry points expose."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh, expf, tanhf

cnp.import_array()

ctypedef fused real:
    float
    double

GATES = {"rnn": 1, "lstm": 4, "gru": 3}
cdef dict _KIND = {"rnn": 0, "lstm": 1, "gru": 2}


cdef inline real _tanh(real a) noexcept nogil:
    if real is float:
        return tanhf(a)
    else:
        return tanh(a)


cdef inline real _sig(real a) noexcept nogil:
    if real is float:
        return 1.0 / (1.0 + expf(-a))
    else:
        return 1.0 / (1.0 + exp(-a))


cdef inline void _matvec(const real* U, const real* v, real* out,
                         Py_ssize_t rows, Py_ssize_t cols) noexcept nogil:
    cdef Py_ssize_t j, k
    cdef real acc
    for j in range(rows):
        acc = 0
        for k in range(cols):
            acc = acc + U[j * cols + k] * v[k]
        out[j] = acc


cdef void _step_fwd(int kind, const real* p, const real* h, const real* c,
                    const real* U, const real* b, const real* s,
                    real* h_new, real* c_new, real* gates, real* uh,
                    real* work, Py_ssize_t H) noexcept nogil:
    cdef Py_ssize_t j
    cdef real i_, f_, g_, o_, z, n
    if kind == 0:
        _matvec(U, h, uh, H, H)
        for j in range(H):
            h_new[j] = _tanh(p[j] + s[j] * uh[j] + b[j])
            gates[j] = h_new[j]
            c_new[j] = c[j]
    elif kind == 1:
        _matvec(U, h, uh, 4 * H, H)
        for j in range(2 * H):
            gates[j] = _sig(p[j] + s[j] * uh[j] + b[j])
        for j in range(2 * H, 3 * H):
            gates[j] = _tanh(p[j] + s[j] * uh[j] + b[j])
        for j in range(3 * H, 4 * H):
            gates[j] = _sig(p[j] + s[j] * uh[j] + b[j])
        for j in range(H):
            i_ = gates[j]
            f_ = gates[H + j]
            g_ = gates[2 * H + j]
            o_ = gates[3 * H + j]
            c_new[j] = f_ * c[j] + i_ * g_
            h_new[j] = o_ * _tanh(c_new[j])
    else:
        _matvec(U, h, uh, 2 * H, H)
        for j in range(2 * H):
            gates[j] = _sig(p[j] + s[j] * uh[j] + b[j])
        for j in range(H):
            work[j] = gates[H + j] * h[j]
        _matvec(U + 2 * H * H, work, uh + 2 * H, H, H)
        for j in range(2 * H, 3 * H):
            gates[j] = _tanh(p[j] + s[j] * uh[j] + b[j])
        for j in range(H):
            z = gates[j]
            n = gates[2 * H + j]
            h_new[j] = (1 - z) * h[j] + z * n
            c_new[j] = c[j]


cdef void _step_bwd(int kind, const real* dh_new, const real* dc_new,
                    const real* h, const real* c, const real* c_new, const real* h_new,
                    const real* gates, const real* U, const real* s,
                    real* da, real* dh, real* dc, real* dU, real* work,
                    Py_ssize_t H) noexcept nogil:
    """Writes da, dh, dc; accumulates into dU."""
    cdef Py_ssize_t j, k, G
    cdef real i_, f_, g_, o_, tc, dcj, z, r, n, e
    if kind == 0:
        G = H
        for j in range(H):
            da[j] = dh_new[j] * (1 - h_new[j] * h_new[j])
            dc[j] = dc_new[j]
    elif kind == 1:
        G = 4 * H
        for j in range(H):
            i_ = gates[j]
            f_ = gates[H + j]
            g_ = gates[2 * H + j]
            o_ = gates[3 * H + j]
            tc = _tanh(c_new[j])
            dcj = dc_new[j] + dh_new[j] * o_ * (1 - tc * tc)
            da[j] = dcj * g_ * i_ * (1 - i_)
            da[H + j] = dcj * c[j] * f_ * (1 - f_)
            da[2 * H + j] = dcj * i_ * (1 - g_ * g_)
            da[3 * H + j] = dh_new[j] * tc * o_ * (1 - o_)
            dc[j] = dcj * f_
    else:
        G = 2 * H
        # n gate first: needs U_n^T (s_n * da_n) to reach r and h
        for j in range(H):
            z = gates[j]
            n = gates[2 * H + j]
            da[2 * H + j] = dh_new[j] * z * (1 - n * n)
            da[j] = dh_new[j] * (n - h[j]) * z * (1 - z)
            work[j] = 0
            dc[j] = dc_new[j]
        for j in range(H):
            e = s[2 * H + j] * da[2 * H + j]
            for k in range(H):
                work[k] = work[k] + U[(2 * H + j) * H + k] * e
                dU[(2 * H + j) * H + k] += e * gates[H + k] * h[k]
        for j in range(H):
            r = gates[H + j]
            da[H + j] = work[j] * h[j] * r * (1 - r)
            dh[j] = dh_new[j] * (1 - gates[j]) + work[j] * r
    if kind != 2:
        for k in range(H):
            dh[k] = 0
    # shared: rows [0, G) use the plain hidden state
    for j in range(G):
        e = s[j] * da[j]
        for k in range(H):
            dh[k] = dh[k] + U[j * H + k] * e
            dU[j * H + k] += e * h[k]


def _dtype(a):
    return np.float32 if np.result_type(a) == np.float32 else np.float64


def _ptr_check(kind):
    try:
        return _KIND[kind]
    except KeyError:
        raise ValueError(f"unknown cell kind {kind!r}")


def step_forward(kind, p, h, c, U, b, s):
    cdef int k = _ptr_check(kind)
    dt = _dtype(p)
    return _step_forward_impl(k, *[np.ascontiguousarray(a, dt) for a in (p, h, c, U, b, s)])


def _step_forward_impl(int kind, const real[::1] p, const real[::1] h, const real[::1] c,
                       const real[:, ::1] U, const real[::1] b, const real[::1] s):
    cdef Py_ssize_t H = h.shape[0]
    cdef Py_ssize_t GH = p.shape[0]
    dt = np.float32 if real is float else np.float64
    h_new = np.empty(H, dtype=dt)
    c_new = np.empty(H, dtype=dt)
    gates = np.empty(GH, dtype=dt)
    uh = np.empty(GH, dtype=dt)
    work = np.empty(H, dtype=dt)
    cdef real[::1] hn = h_new, cn = c_new, gv = gates, uv = uh, wv = work
    _step_fwd(kind, &p[0], &h[0], &c[0], &U[0, 0], &b[0], &s[0],
              &hn[0], &cn[0], &gv[0], &uv[0], &wv[0], H)
    return h_new, c_new, gates, uh


def step_backward(kind, dh_new, dc_new, h, c, c_new, h_new, gates, uh, U, s):
    cdef int k = _ptr_check(kind)
    dt = _dtype(gates)
    args = [np.ascontiguousarray(a, dt) for a in (dh_new, dc_new, h, c, c_new, h_new, gates, U, s)]
    da, dh, dc, dU = _step_backward_impl(k, *args)
    return da, dh, dc, da * uh, dU


def _step_backward_impl(int kind, const real[::1] dh_new, const real[::1] dc_new,
                        const real[::1] h, const real[::1] c, const real[::1] c_new, const real[::1] h_new, const real[::1] gates,
                        const real[:, ::1] U, const real[::1] s):
    cdef Py_ssize_t H = h.shape[0]
    cdef Py_ssize_t GH = gates.shape[0]
    dt = np.float32 if real is float else np.float64
    da = np.empty(GH, dtype=dt)
    dh = np.empty(H, dtype=dt)
    dc = np.empty(H, dtype=dt)
    dU = np.zeros((GH, H), dtype=dt)
    work = np.empty(H, dtype=dt)
    cdef real[::1] dav = da, dhv = dh, dcv = dc, wv = work
    cdef real[:, ::1] dUv = dU
    _step_bwd(kind, &dh_new[0], &dc_new[0], &h[0], &c[0], &c_new[0], &h_new[0],
              &gates[0], &U[0, 0], &s[0], &dav[0], &dhv[0], &dcv[0], &dUv[0, 0], &wv[0], H)
    return da, dh, dc, dU


def seq_forward(kind, P, h0, c0, U, b):
    cdef int k = _ptr_check(kind)
    dt = _dtype(P)
    return _seq_forward_impl(k, *[np.ascontiguousarray(a, dt) for a in (P, h0, c0, U, b)])


def _seq_forward_impl(int kind, const real[:, ::1] P, const real[::1] h0, const real[::1] c0,
                      const real[:, ::1] U, const real[::1] b):
    cdef Py_ssize_t T = P.shape[0], GH = P.shape[1], H = h0.shape[0], t
    dt = np.float32 if real is float else np.float64
    hs = np.empty((T, H), dtype=dt)
    cs = np.empty((T, H), dtype=dt)
    gates = np.empty((T, GH), dtype=dt)
    uh = np.empty((T, GH), dtype=dt)
    s = np.ones(GH, dtype=dt)
    work = np.empty(H, dtype=dt)
    cdef real[:, ::1] hv = hs, cv = cs, gv = gates, uv = uh
    cdef real[::1] sv = s, wv = work
    if T == 0:
        return hs, cs, gates, uh
    with nogil:
        _step_fwd(kind, &P[0, 0], &h0[0], &c0[0], &U[0, 0], &b[0], &sv[0],
                  &hv[0, 0], &cv[0, 0], &gv[0, 0], &uv[0, 0], &wv[0], H)
        for t in range(1, T):
            _step_fwd(kind, &P[t, 0], &hv[t - 1, 0], &cv[t - 1, 0], &U[0, 0], &b[0], &sv[0],
                      &hv[t, 0], &cv[t, 0], &gv[t, 0], &uv[t, 0], &wv[0], H)
    return hs, cs, gates, uh


def seq_backward(kind, dhs, h0, c0, hs, cs, gates, uh, U):
    cdef int k = _ptr_check(kind)
    dt = _dtype(hs)
    dP, dU = _seq_backward_impl(k, *[np.ascontiguousarray(a, dt) for a in (dhs, h0, c0, hs, cs, gates, U)])
    return dP, dU, dP.sum(axis=0)


def _seq_backward_impl(int kind, const real[:, ::1] dhs, const real[::1] h0, const real[::1] c0,
                       const real[:, ::1] hs, const real[:, ::1] cs, const real[:, ::1] gates, const real[:, ::1] U):
    cdef Py_ssize_t T = hs.shape[0], H = hs.shape[1], GH = gates.shape[1], t, j
    dt = np.float32 if real is float else np.float64
    dP = np.empty((T, GH), dtype=dt)
    dU = np.zeros((GH, H), dtype=dt)
    s = np.ones(GH, dtype=dt)
    dh = np.zeros(H, dtype=dt)
    dc = np.zeros(H, dtype=dt)
    dh_in = np.empty(H, dtype=dt)
    dc_out = np.empty(H, dtype=dt)
    work = np.empty(H, dtype=dt)
    cdef real[:, ::1] dPv = dP, dUv = dU
    cdef real[::1] sv = s, dhv = dh, dcv = dc, dinv = dh_in, dcov = dc_out, wv = work
    cdef const real* hp
    cdef const real* cp
    with nogil:
        for t in range(T - 1, -1, -1):
            for j in range(H):
                dinv[j] = dhs[t, j] + dhv[j]
            if t > 0:
                hp = &hs[t - 1, 0]
                cp = &cs[t - 1, 0]
            else:
                hp = &h0[0]
                cp = &c0[0]
            _step_bwd(kind, &dinv[0], &dcv[0], hp, cp, &cs[t, 0], &hs[t, 0],
                      &gates[t, 0], &U[0, 0], &sv[0], &dPv[t, 0], &dhv[0], &dcov[0],
                      &dUv[0, 0], &wv[0], H)
            for j in range(H):
                dcv[j] = dcov[j]
    return dP, dU


def one_pole_lowpass(x, double coeff):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n, N = xv.shape[0]
    y = np.empty(N)
    cdef double[::1] yv = y
    cdef double prev = 0.0, g = 1.0 - coeff
    with nogil:
        for n in range(N):
            prev = g * xv[n] + coeff * prev
            yv[n] = prev
    return y


def peak_envelope(x_abs, double attack, double release):
    cdef const double[::1] xv = np.ascontiguousarray(x_abs, dtype=np.float64)
    cdef Py_ssize_t n, N = xv.shape[0]
    e = np.empty(N)
    cdef double[::1] ev = e
    cdef double prev = 0.0, a, v
    with nogil:
        for n in range(N):
            v = xv[n]
            a = attack if v > prev else release
            prev = a * prev + (1.0 - a) * v
            ev[n] = prev
    return e


def biquad(x, double b0, double b1, double b2, double a1, double a2):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n, N = xv.shape[0]
    y = np.empty(N)
    cdef double[::1] yv = y
    cdef double x1 = 0, x2 = 0, y1 = 0, y2 = 0, xn, yn
    with nogil:
        for n in range(N):
            xn = xv[n]
            yn = b0 * xn + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2
            x2 = x1
            x1 = xn
            y2 = y1
            y1 = yn
            yv[n] = yn
    return y
