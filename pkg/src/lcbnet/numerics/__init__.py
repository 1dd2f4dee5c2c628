from . import ops
from .array import (DiffArray, Parameter, as_array, backward, compute_gradients, dropout_scope, grad_enabled,
                    make_node, no_grad)
from .gradcheck import GradCheckReport, grad_check, relative_error
from .ops import conv1d_same, layer_norm, matmul, sigmoid, softmax_rows

__all__ = [
    "DiffArray", "Parameter", "as_array", "backward", "compute_gradients", "dropout_scope", "grad_enabled",
    "make_node",
    "no_grad", "GradCheckReport", "grad_check", "relative_error", "ops",
    "conv1d_same", "layer_norm", "matmul", "sigmoid", "softmax_rows",
]
