"""Minimal reverse-mode differentiation kernel set and optimizer."""

from .ops import (activation, add, broadcast_to, concat, conv1d_causal, linear, mul, prelu,
                  relu, reshape, sigmoid, sub, take, tanh)
from .optim import Adam, AdamState, adam_step, clip_grad_norm
from .recurrent import (GATES, cell_param_count, cell_step, gru_cell, lstm_cell, rnn_sequence,
                        vanilla_rnn_cell)
from .tape import Parameter, ParamStore, Tape, Tensor, as_tensor, no_grad, record

__all__ = [
    "GATES", "Adam", "AdamState", "ParamStore", "Parameter", "Tape", "Tensor", "activation",
    "adam_step", "add", "as_tensor", "broadcast_to", "cell_param_count", "cell_step",
    "clip_grad_norm", "concat", "conv1d_causal", "gru_cell", "linear", "lstm_cell", "mul", "no_grad",
    "prelu", "record", "relu", "reshape", "rnn_sequence", "sigmoid", "sub", "take", "tanh",
    "vanilla_rnn_cell",
]
