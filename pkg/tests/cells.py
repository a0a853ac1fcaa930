"""Backbone x conditioning matrix and the randomized shapes used by the gradient suite."""

import numpy as np

from neuralfx import ModelSpec, build_model

BACKBONES = ("tcn", "gcn", "rnn", "lstm", "gru")
MECHANISMS = ("concat", "film", "static_hyper", "dynamic_hyper")
CELLS = [(b, m) for b in BACKBONES for m in MECHANISMS
         if not (m == "dynamic_hyper" and b in ("tcn", "gcn"))]

# (channels, layers, kernel, growth, n_conds, T) for CNNs
CNN_SHAPES = [(2, 2, 3, 2, 1, 12), (3, 1, 2, 1, 2, 9), (2, 3, 2, 2, 1, 16), (3, 2, 3, 1, 3, 10),
              (1, 2, 2, 3, 1, 14)]
# (hidden, n_conds, T) for recurrent models
RNN_SHAPES = [(3, 1, 8), (2, 2, 6), (4, 1, 5), (3, 3, 7), (2, 2, 10)]


def small_spec(backbone, conditioning, i=0, sample_rate=8000):
    if backbone in ("tcn", "gcn"):
        C, L, K, g, n, _ = CNN_SHAPES[i]
        return ModelSpec(backbone, conditioning, n_conds=n, channels=C, layers=L, kernel=K,
                         dilation_growth=g, cond_hidden=3, sample_rate=sample_rate)
    H, n, _ = RNN_SHAPES[i]
    return ModelSpec(backbone, conditioning, n_conds=n, hidden_size=H, cond_hidden=3,
                     dyn_hidden=2, sample_rate=sample_rate)


def length_for(backbone, i):
    return (CNN_SHAPES if backbone in ("tcn", "gcn") else RNN_SHAPES)[i][-1]


def perturbed_model(spec, seed):
    """Float64 model with every parameter moved off its initial value.

    Zero-initialized generator layers would otherwise make many gradients
    trivially zero.
    """
    model = build_model(spec, seed=seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 100)
    for p in model.parameters():
        p.data += 0.3 * rng.standard_normal(p.data.shape)
    return model
