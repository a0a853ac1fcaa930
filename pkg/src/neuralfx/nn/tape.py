"""Tensors, parameters and the recording tape.

Ops append ``(inputs, outputs, backward)`` records to the active :class:`Tape`
when any input requires a gradient. :meth:`Tape.backward` walks the records
in reverse and accumulates into ``.grad``. Parameter gradients persist across
tapes until the optimizer zeroes them.
"""

from __future__ import annotations

import threading
import zlib

import numpy as np

_local = threading.local()


class Tensor:
    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = np.asarray(data, dtype=dtype)
        self.grad = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.shape}, dtype={self.dtype})"


class Parameter(Tensor):
    """A named trainable tensor with a persistent gradient buffer."""

    __slots__ = ("name",)

    def __init__(self, name, data):
        super().__init__(np.array(data), requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self):
        self.grad[...] = 0


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


class Tape:
    """Linear record of differentiable ops executed inside ``with Tape():``."""

    def __init__(self):
        self.entries = []

    def __enter__(self):
        _stack().append(self)
        return self

    def __exit__(self, *exc):
        _stack().pop()
        return False

    @staticmethod
    def active():
        stack = _stack()
        return stack[-1] if stack else None

    def backward(self, output, grad=None):
        """Backpropagate ``grad`` (default ones) from ``output`` through the tape."""
        seed = np.ones_like(output.data) if grad is None else np.asarray(grad)
        _accumulate(output, seed)
        for inputs, outputs, fn in reversed(self.entries):
            grads = [o.grad for o in outputs]
            if all(g is None for g in grads):
                continue
            grads = [np.zeros_like(o.data) if g is None else g for g, o in zip(grads, outputs)]
            for t, g in zip(inputs, fn(*grads)):
                if g is not None and t.requires_grad:
                    _accumulate(t, g)
        self.entries.clear()


class no_grad:
    """Context in which no op is recorded, even inside an outer tape."""

    def __enter__(self):
        _stack().append(None)
        return self

    def __exit__(self, *exc):
        _stack().pop()
        return False


def _stack():
    if not hasattr(_local, "stack"):
        _local.stack = []
    return _local.stack


def _accumulate(t, g):
    g = np.asarray(g, dtype=t.data.dtype)
    if g.shape != t.data.shape:
        g = np.broadcast_to(g, t.data.shape)
    if t.grad is None:
        t.grad = g.copy()
    else:
        t.grad += g


def record(outputs, inputs, backward):
    """Register ``backward`` for ``outputs`` if the tape is live and any input needs grad."""
    tape = Tape.active()
    if tape is not None and any(t.requires_grad for t in inputs):
        for o in outputs:
            o.requires_grad = True
        tape.entries.append((tuple(inputs), tuple(outputs), backward))


class ParamStore:
    """Creates named parameters with seed-and-name determined initial values.

    Each parameter draws from its own generator keyed by ``(seed, crc32(name))``,
    so a parameter's initial value does not depend on what else the model holds.
    """

    def __init__(self, seed=0, dtype=np.float32):
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)
        self.params = {}

    def _add(self, name, value):
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        p = Parameter(name, value.astype(self.dtype))
        self.params[name] = p
        return p

    def uniform(self, name, shape, fan_in):
        rng = np.random.default_rng([self.seed, zlib.crc32(name.encode())])
        bound = 1.0 / np.sqrt(fan_in) if fan_in > 0 else 1.0
        return self._add(name, rng.uniform(-bound, bound, size=shape))

    def zeros(self, name, shape):
        return self._add(name, np.zeros(shape))

    def full(self, name, shape, value):
        return self._add(name, np.full(shape, float(value)))

    def values(self):
        return list(self.params.values())
