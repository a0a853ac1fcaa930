"""Hot sample-loop kernels.

The compiled extension (``_ckernels``) is used when it imports; otherwise the
numpy implementations in ``_pykernels`` take over. Set ``NFX_PURE_PYTHON=1``
to force the fallback.
"""

import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("NFX_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_impl = compiled_backend or python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

GATES = python_backend.GATES
step_forward = _impl.step_forward
step_backward = _impl.step_backward
seq_forward = _impl.seq_forward
seq_backward = _impl.seq_backward
one_pole_lowpass = _impl.one_pole_lowpass
peak_envelope = _impl.peak_envelope
biquad = _impl.biquad

__all__ = [
    "BACKEND", "GATES", "biquad", "compiled_backend", "one_pole_lowpass", "peak_envelope",
    "python_backend", "seq_backward", "seq_forward", "step_backward", "step_forward",
]
