"""Control mechanisms that inject a condition vector into a backbone.

Four mechanisms are provided: Concat, FiLM, StaticHyper and DynamicHyper.
The FiLM generator and both hypernetworks zero-initialize their last layer, so
at initialization a conditioned model computes exactly the function of the
matching unconditioned backbone.

StaticHyper and DynamicHyper are reconstructions. StaticHyper emits weight
deltas that are added to a learned base weight set, once per condition vector.
DynamicHyper runs a small recurrent cell next to the main cell and emits
per-step row scales for the main cell's input and hidden weight matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ConditionDimMismatch, LayoutMismatch, ShapeMismatch

MECHANISMS = ("concat", "film", "static_hyper", "dynamic_hyper")


def as_condition(cond, n_conds):
    """Validate a condition vector and return it as a float64 array."""
    c = np.asarray(cond if cond is not None else [], dtype=np.float64).reshape(-1)
    if c.shape[0] != n_conds:
        raise ConditionDimMismatch(f"expected {n_conds} condition values, got {c.shape[0]}")
    if not np.all(np.isfinite(c)):
        raise ValueError("condition values must be finite")
    return c


def concat_condition(x, cond):
    """Append the condition to ``x``.

    A 1-D ``x`` gets ``cond`` appended. A 2-D ``[C, T]`` input gets one
    constant row per condition value.
    """
    x = nn.as_tensor(x)
    cond = np.asarray(cond, dtype=x.dtype).reshape(-1)
    if cond.size == 0:
        return x
    if x.data.ndim == 1:
        return nn.concat([x, cond], axis=0)
    rows = np.broadcast_to(cond[:, None], (cond.size, x.shape[1]))
    return nn.concat([x, rows], axis=0)


class MLP:
    """Two-layer perceptron ``in -> hidden (tanh) -> out`` with zero-initialized output layer."""

    def __init__(self, store: nn.ParamStore, prefix, n_in, n_out, hidden=16):
        self.n_in, self.n_out, self.hidden = n_in, n_out, hidden
        self.W1 = store.uniform(f"{prefix}.W1", (hidden, n_in), n_in)
        self.b1 = store.uniform(f"{prefix}.b1", (hidden,), n_in)
        self.W2 = store.zeros(f"{prefix}.W2", (n_out, hidden))
        self.b2 = store.zeros(f"{prefix}.b2", (n_out,))

    def __call__(self, cond):
        h = nn.tanh(nn.linear(cond, self.W1, self.b1))
        return nn.linear(h, self.W2, self.b2)


# ------------------------------------------------------------------- FiLM


@dataclass
class FilmParams:
    gamma: nn.Tensor
    beta: nn.Tensor


def film_generate(cond, generator: MLP, channels) -> FilmParams:
    """Produce ``gamma = 1 + raw`` and ``beta`` from the condition."""
    if generator.n_out != 2 * channels:
        raise ShapeMismatch(f"FiLM generator emits {generator.n_out} values, need {2 * channels}")
    cond = np.asarray(cond, dtype=generator.W1.dtype)
    raw = generator(cond)
    one = np.ones(channels, dtype=raw.dtype)
    gamma = nn.add(one, nn.take(raw, slice(0, channels)))
    beta = nn.take(raw, slice(channels, 2 * channels))
    return FilmParams(gamma, beta)


def film_apply(h, p: FilmParams, channel_axis=0):
    """``gamma[c] * h[c, t] + beta[c]`` along ``channel_axis``."""
    h = nn.as_tensor(h)
    C = p.gamma.shape[0]
    if h.shape[channel_axis] != C or p.beta.shape != (C,):
        raise ShapeMismatch(f"FiLM with {C} channels applied to shape {h.shape}")
    shape = [1] * h.data.ndim
    shape[channel_axis] = C
    gamma = nn.reshape(p.gamma, tuple(shape))
    beta = nn.reshape(p.beta, tuple(shape))
    return nn.add(nn.mul(h, gamma), beta)


class FilmGenerator:
    def __init__(self, store, prefix, n_conds, channels, hidden=16):
        self.channels = channels
        self.mlp = MLP(store, prefix, n_conds, 2 * channels, hidden)

    def __call__(self, cond) -> FilmParams:
        return film_generate(cond, self.mlp, self.channels)


# ------------------------------------------------------------ StaticHyper


def static_hyper_generate(cond, hyper: MLP, target_layout):
    """Flat weight vector (one entry per target parameter) from the condition."""
    total = int(sum(int(np.prod(s)) for s in target_layout))
    if hyper.n_out != total:
        raise LayoutMismatch(f"hypernetwork emits {hyper.n_out} values, layout needs {total}")
    return hyper(np.asarray(cond, dtype=hyper.W1.dtype))


class StaticHyper:
    """Generates the wrapped weights once per condition as ``base + delta(cond)``.

    The raw MLP output is scaled by ``1 / (hidden + 1)``. Each generated weight
    sums ``hidden + 1`` output-layer parameters, and Adam moves every one of them
    by about ``lr`` per step, so without the scale a generated weight moves up
    to ``hidden + 1`` times faster than a plain parameter and training diverges
    at learning rates that suit the other mechanisms.
    """

    def __init__(self, store, prefix, n_conds, base_params, hidden=16):
        self.base = list(base_params)
        self.layout = [p.shape for p in self.base]
        total = sum(int(np.prod(s)) for s in self.layout)
        self.mlp = MLP(store, prefix, n_conds, total, hidden)
        self.scale = 1.0 / (hidden + 1)

    def __call__(self, cond):
        flat = static_hyper_generate(cond, self.mlp, self.layout)
        flat = nn.mul(flat, np.asarray(self.scale, dtype=flat.data.dtype))
        out, pos = [], 0
        for p in self.base:
            n = p.data.size
            delta = nn.reshape(nn.take(flat, slice(pos, pos + n)), p.shape)
            out.append(nn.add(p, delta))
            pos += n
        return out


# ----------------------------------------------------------- DynamicHyper


class DynamicHyper:
    """Small recurrent cell emitting per-step row scales for a main recurrent cell.

    Each step consumes ``[cond ‖ h_main]`` and emits ``1 + e`` where ``e`` is
    split into scales for the rows of the main input projection and of the
    hidden-to-hidden product.
    """

    def __init__(self, store, prefix, kind, n_conds, main_hidden, hidden=8):
        self.kind = kind
        self.hidden = hidden
        gates = nn.GATES[kind]
        self.rows = gates * main_hidden
        n_in = n_conds + main_hidden
        self.W = store.uniform(f"{prefix}.W", (gates * hidden, n_in), max(n_in, 1))
        self.U = store.uniform(f"{prefix}.U", (gates * hidden, hidden), hidden)
        self.b = store.uniform(f"{prefix}.b", (gates * hidden,), hidden)
        self.We = store.zeros(f"{prefix}.emit.W", (2 * self.rows, hidden))
        self.be = store.zeros(f"{prefix}.emit.b", (2 * self.rows,))

    def initial_state(self, dtype):
        z = np.zeros(self.hidden, dtype=dtype)
        return z, z.copy()

    def step(self, cond, h_main, state):
        """Returns ``(scale_input, scale_hidden, new_state)``."""
        hh, hc = state
        inp = nn.concat([np.asarray(cond, dtype=self.W.dtype), h_main], axis=0)
        p = nn.linear(inp, self.W)
        hh, hc = nn.cell_step(self.kind, p, hh, hc, self.U, self.b)
        e = nn.linear(hh, self.We, self.be)
        scales = nn.add(np.ones(2 * self.rows, dtype=e.dtype), e)
        return (nn.take(scales, slice(0, self.rows)),
                nn.take(scales, slice(self.rows, 2 * self.rows)),
                (hh, hc))


def dynamic_hyper_step(cond, h_main, hyper_state, hyper: DynamicHyper):
    """One DynamicHyper step: ``((scale_input, scale_hidden), new_state)``."""
    if np.shape(nn.as_tensor(h_main).data) != (hyper.rows // nn.GATES[hyper.kind],):
        raise ShapeMismatch("main hidden state does not match the hypernetwork layout")
    sx, sh, state = hyper.step(cond, h_main, hyper_state)
    return (sx, sh), state
