"""Dense numpy kernels with hand-derived gradients."""

from edgedetect.nn.activations import activation, activation_grad, relu, sigmoid, tanh
from edgedetect.nn.cells import (
    CELL_KINDS,
    CellParams,
    baseline_cell_step,
    cell_param_count,
    fastgrnn_step,
    fastrnn_step,
    init_cell,
    sequence_backward,
    sequence_forward,
)
from edgedetect.nn.layers import (
    BN_EPS,
    BN_MOMENTUM,
    batchnorm,
    batchnorm_backward,
    dense_backward,
    dense_forward,
)

__all__ = [
    "BN_EPS",
    "BN_MOMENTUM",
    "CELL_KINDS",
    "CellParams",
    "activation",
    "activation_grad",
    "baseline_cell_step",
    "batchnorm",
    "batchnorm_backward",
    "cell_param_count",
    "dense_backward",
    "dense_forward",
    "fastgrnn_step",
    "fastrnn_step",
    "init_cell",
    "relu",
    "sequence_backward",
    "sequence_forward",
    "sigmoid",
    "tanh",
]
