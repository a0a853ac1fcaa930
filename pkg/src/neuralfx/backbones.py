"""Effect-processor backbones: TCN, GCN and the recurrent family.

Every model exposes the same contract: ``model(x, cond, state)`` runs on the
active tape and returns ``(Tensor y, new_state)``; :meth:`Model.forward`
maps an :class:`AudioBuffer` to an :class:`AudioBuffer` without recording.

Block definitions:

* TCN block: dilated causal conv, conditioning, activation, plus a 1x1 conv
  residual path. A final 1x1 conv mixes channels to mono.
* GCN block: dilated causal conv producing ``2C`` channels, gated activation
  ``tanh(a) * sigmoid(b)``, conditioning, skip accumulation and a 1x1
  residual. The summed skips go through a 1x1 conv to mono.
* Recurrent: cell over ``[x ‖ cond]`` (or the conditioner-transformed input),
  a linear output layer and a direct skip ``y = net(x) + x``.

CNN streaming state is the trailing ``receptive_field - 1`` input samples.
Each call prepends that context and crops the output, so chunked processing
reproduces whole-buffer processing.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import nn
from .audio_io import AudioBuffer
from .conditioning import (MECHANISMS, DynamicHyper, FilmGenerator, StaticHyper, as_condition,
                           concat_condition, film_apply)
from .errors import UnsupportedSpec

CNN_BACKBONES = ("tcn", "gcn")
RNN_BACKBONES = ("rnn", "lstm", "gru")
ACTIVATIONS = ("tanh", "prelu")


@dataclass(frozen=True)
class ModelSpec:
    backbone: str
    conditioning: str = "concat"
    n_conds: int = 0
    channels: int = 16
    layers: int | None = None
    kernel: int = 3
    dilation_growth: int = 2
    hidden_size: int = 16
    sample_rate: int = 44100
    activation: str = "tanh"
    cond_hidden: int = 16
    dyn_hidden: int = 8

    def __post_init__(self):
        if self.layers is None:
            object.__setattr__(self, "layers", 4 if self.backbone in CNN_BACKBONES else 1)
        self.validate()

    @property
    def family(self):
        return "cnn" if self.backbone in CNN_BACKBONES else "rnn"

    def validate(self):
        if self.backbone not in CNN_BACKBONES + RNN_BACKBONES:
            raise UnsupportedSpec(f"unknown backbone {self.backbone!r}")
        if self.conditioning not in MECHANISMS:
            raise UnsupportedSpec(f"unknown conditioning {self.conditioning!r}")
        if self.conditioning == "dynamic_hyper" and self.family == "cnn":
            raise UnsupportedSpec("dynamic_hyper is defined for recurrent backbones only")
        if self.activation not in ACTIVATIONS:
            raise UnsupportedSpec(f"unknown activation {self.activation!r}")
        ints = {"n_conds": 0, "channels": 1, "layers": 1, "kernel": 1, "dilation_growth": 1,
                "hidden_size": 1, "sample_rate": 1, "cond_hidden": 1, "dyn_hidden": 1}
        for name, lo in ints.items():
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < lo:
                raise UnsupportedSpec(f"{name} must be an integer >= {lo}, got {v!r}")
        if self.family == "rnn" and self.layers != 1:
            raise UnsupportedSpec("recurrent backbones support a single layer")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise UnsupportedSpec(f"unknown model fields {sorted(unknown)}")
        return cls(**d)


def receptive_field(spec: ModelSpec):
    """Samples of input history seen by one output sample (``inf`` for recurrent models)."""
    if spec.family == "rnn":
        return math.inf
    return 1 + (spec.kernel - 1) * sum(spec.dilation_growth ** i for i in range(spec.layers))


@dataclass
class RecurrentState:
    h: np.ndarray
    c: np.ndarray
    hyper: tuple | None = None


@dataclass
class ConvState:
    context: np.ndarray


class Model:
    def __init__(self, spec: ModelSpec, seed=0, dtype=np.float32):
        self.spec = spec
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)
        self.store = nn.ParamStore(seed, dtype)

    def parameters(self):
        return self.store.values()

    def named_parameters(self):
        return dict(self.store.params)

    @property
    def param_count(self):
        return sum(p.data.size for p in self.parameters())

    def forward(self, buf: AudioBuffer, cond, state=None):
        """Process a buffer without recording gradients. Returns ``(AudioBuffer, state)``."""
        cond = as_condition(cond, self.spec.n_conds)
        if len(buf) == 0:
            raise ValueError("input buffer is empty")
        with nn.no_grad():
            y, state = self(buf.samples, cond, state)
        return AudioBuffer(y.data.astype(np.float64), buf.sample_rate), state

    def process(self, buf: AudioBuffer, cond) -> AudioBuffer:
        return self.forward(buf, cond)[0]

    def __call__(self, x, cond, state=None):
        raise NotImplementedError


class RecurrentModel(Model):
    def __init__(self, spec, seed=0, dtype=np.float32):
        super().__init__(spec, seed, dtype)
        s = self.store
        H, G = spec.hidden_size, nn.GATES[spec.backbone]
        n_in = 1 + (spec.n_conds if spec.conditioning == "concat" else 0)
        self.kind = spec.backbone
        self.W = s.uniform("cell.W", (G * H, n_in), n_in)
        self.U = s.uniform("cell.U", (G * H, H), H)
        self.b = s.uniform("cell.b", (G * H,), H)
        self.out_W = s.uniform("out.W", (1, H), H)
        self.out_b = s.uniform("out.b", (1,), H)
        self.film = self.hyper = self.dyn = None
        if spec.conditioning == "film":
            self.film = FilmGenerator(s, "film", spec.n_conds, G * H, spec.cond_hidden)
        elif spec.conditioning == "static_hyper":
            self.hyper = StaticHyper(s, "hyper", spec.n_conds, [self.W, self.U, self.b],
                                     spec.cond_hidden)
        elif spec.conditioning == "dynamic_hyper":
            self.dyn = DynamicHyper(s, "dyn", self.kind, spec.n_conds, H, spec.dyn_hidden)

    def initial_state(self):
        H = self.spec.hidden_size
        z = np.zeros(H, dtype=self.dtype)
        hyper = self.dyn.initial_state(self.dtype) if self.dyn else None
        return RecurrentState(z, z.copy(), hyper)

    def __call__(self, x, cond, state=None):
        spec = self.spec
        cond = as_condition(cond, spec.n_conds).astype(self.dtype)
        state = state or self.initial_state()
        x = np.asarray(x, dtype=self.dtype).reshape(-1)
        xcol = x[:, None]
        W, U, b = self.W, self.U, self.b
        if spec.conditioning == "concat":
            inp = np.concatenate([xcol, np.broadcast_to(cond, (len(x), spec.n_conds))], axis=1)
            P = nn.linear(inp, W)
        elif spec.conditioning == "film":
            P = film_apply(nn.linear(xcol, W), self.film(cond), channel_axis=1)
        elif spec.conditioning == "static_hyper":
            W, U, b = self.hyper(cond)
            P = nn.linear(xcol, W)
        else:
            return self._dynamic(x, xcol, cond, state, W, U, b)
        hs, h, c = nn.rnn_sequence(self.kind, P, U, b, state.h, state.c)
        return self._output(hs, x), RecurrentState(h, c)

    def _output(self, hs, x):
        y = nn.reshape(nn.linear(hs, self.out_W, self.out_b), (len(x),))
        return nn.add(y, x)

    def _dynamic(self, x, xcol, cond, state, W, U, b):
        Q = nn.linear(xcol, W)
        h, c = nn.Tensor(state.h), nn.Tensor(state.c)
        hyper_state = tuple(nn.Tensor(v) for v in state.hyper)
        rows = []
        for t in range(len(x)):
            sx, sh, hyper_state = self.dyn.step(cond, h, hyper_state)
            p = nn.mul(nn.take(Q, t), sx)
            h, c = nn.cell_step(self.kind, p, h, c, U, b, sh)
            rows.append(nn.reshape(h, (1, -1)))
        if rows:
            hs = nn.concat(rows, axis=0)
        else:
            hs = nn.Tensor(np.zeros((0, self.spec.hidden_size), dtype=self.dtype))
        new = RecurrentState(h.data.copy(), c.data.copy(),
                             tuple(v.data.copy() for v in hyper_state))
        return self._output(hs, x), new


class _ConvModel(Model):
    def __init__(self, spec, seed=0, dtype=np.float32):
        super().__init__(spec, seed, dtype)
        self.rf = receptive_field(spec)
        self.in_ch = 1 + (spec.n_conds if spec.conditioning == "concat" else 0)
        self.films = []
        self.hyper = None

    def initial_state(self):
        return ConvState(np.zeros(self.rf - 1, dtype=self.dtype))

    def _conditioners(self, conv_params):
        spec, s = self.spec, self.store
        if spec.conditioning == "film":
            self.films = [FilmGenerator(s, f"film{i}", spec.n_conds, spec.channels, spec.cond_hidden)
                          for i in range(spec.layers)]
        elif spec.conditioning == "static_hyper":
            self.hyper = StaticHyper(s, "hyper", spec.n_conds, conv_params, spec.cond_hidden)

    def _layer_weights(self, cond):
        if self.hyper is None:
            return self.convs
        gen = self.hyper(cond)
        return [(gen[2 * i], gen[2 * i + 1]) for i in range(len(self.convs))]

    def __call__(self, x, cond, state=None):
        spec = self.spec
        cond = as_condition(cond, spec.n_conds).astype(self.dtype)
        state = state or self.initial_state()
        x = np.asarray(x, dtype=self.dtype).reshape(-1)
        ext = np.concatenate([np.asarray(state.context, dtype=self.dtype), x])
        inp = ext[None, :]
        if spec.conditioning == "concat":
            inp = concat_condition(inp, cond).data
        films = [f(cond) for f in self.films]
        y = self._net(nn.Tensor(inp), cond, films)
        L, T = ext.shape[0], x.shape[0]
        out = nn.take(nn.reshape(y, (L,)), slice(L - T, L))
        ctx = ext[L - (self.rf - 1):].copy() if self.rf > 1 else ext[:0].copy()
        return out, ConvState(ctx)

    def _net(self, inp, cond, films):
        raise NotImplementedError


class TCNModel(_ConvModel):
    def __init__(self, spec, seed=0, dtype=np.float32):
        super().__init__(spec, seed, dtype)
        s, C, K = self.store, spec.channels, spec.kernel
        self.convs, self.res, self.alphas = [], [], []
        c_in = self.in_ch
        for i in range(spec.layers):
            self.convs.append((s.uniform(f"conv{i}.W", (C, c_in, K), c_in * K),
                               s.uniform(f"conv{i}.b", (C,), c_in * K)))
            self.res.append((s.uniform(f"res{i}.W", (C, c_in, 1), c_in),
                             s.uniform(f"res{i}.b", (C,), c_in)))
            if spec.activation == "prelu":
                self.alphas.append(s.full(f"act{i}.alpha", (C,), 0.25))
            c_in = C
        self.out_W = s.uniform("out.W", (1, C, 1), C)
        self.out_b = s.uniform("out.b", (1,), C)
        self._conditioners([t for pair in self.convs for t in pair])

    def _net(self, inp, cond, films):
        spec = self.spec
        P = self.store.params
        h = inp
        for i, (W, b) in enumerate(self._layer_weights(cond)):
            z = nn.conv1d_causal(h, W, b, spec.dilation_growth ** i)
            if films:
                z = film_apply(z, films[i])
            alpha = P[f"act{i}.alpha"] if spec.activation == "prelu" else None
            a = nn.activation(z, spec.activation, alpha)
            h = nn.add(a, nn.conv1d_causal(h, P[f"res{i}.W"], P[f"res{i}.b"], 1))
        return nn.conv1d_causal(h, P["out.W"], P["out.b"], 1)


class GCNModel(_ConvModel):
    def __init__(self, spec, seed=0, dtype=np.float32):
        super().__init__(spec, seed, dtype)
        s, C, K = self.store, spec.channels, spec.kernel
        self.in_W = s.uniform("in.W", (C, self.in_ch, 1), self.in_ch)
        self.in_b = s.uniform("in.b", (C,), self.in_ch)
        self.convs, self.res = [], []
        for i in range(spec.layers):
            self.convs.append((s.uniform(f"conv{i}.W", (2 * C, C, K), C * K),
                               s.uniform(f"conv{i}.b", (2 * C,), C * K)))
            self.res.append((s.uniform(f"res{i}.W", (C, C, 1), C),
                             s.uniform(f"res{i}.b", (C,), C)))
        self.out_W = s.uniform("out.W", (1, C, 1), C)
        self.out_b = s.uniform("out.b", (1,), C)
        self._conditioners([t for pair in self.convs for t in pair])

    def _net(self, inp, cond, films):
        spec, C = self.spec, self.spec.channels
        P = self.store.params
        h = nn.conv1d_causal(inp, P["in.W"], P["in.b"], 1)
        skip = None
        for i, (W, b) in enumerate(self._layer_weights(cond)):
            z = nn.conv1d_causal(h, W, b, spec.dilation_growth ** i)
            g = nn.mul(nn.tanh(nn.take(z, slice(0, C))), nn.sigmoid(nn.take(z, slice(C, 2 * C))))
            if films:
                g = film_apply(g, films[i])
            skip = g if skip is None else nn.add(skip, g)
            h = nn.add(h, nn.conv1d_causal(g, P[f"res{i}.W"], P[f"res{i}.b"], 1))
        return nn.conv1d_causal(skip, P["out.W"], P["out.b"], 1)


_BACKBONE_CLASSES = {"tcn": TCNModel, "gcn": GCNModel, "rnn": RecurrentModel,
                     "lstm": RecurrentModel, "gru": RecurrentModel}


def build_model(spec: ModelSpec, seed=0, dtype=np.float32) -> Model:
    """Instantiate ``spec`` with parameters determined by ``seed`` alone."""
    spec.validate()
    return _BACKBONE_CLASSES[spec.backbone](spec, seed, dtype)
