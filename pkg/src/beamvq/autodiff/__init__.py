from .checkpoint import load_params, save_params
from .nn import add_bias, add_const, conv2d, linear, phase_kernel, pixel_shuffle2x, upconv2d, upsample2x
from .optim import Adam, AdamState
from .tensor import (
    Tensor,
    add,
    gather_rows,
    matmul,
    mean_all,
    mse_reduce,
    mul,
    no_grad,
    relu,
    reshape,
    scale,
    sg,
    sigmoid,
    square,
    stop_gradient,
    sub,
    sum_all,
    sum_squares,
    transpose,
)

__all__ = [
    "Adam", "AdamState", "Tensor", "add", "add_bias", "add_const", "phase_kernel", "pixel_shuffle2x", "conv2d", "gather_rows", "linear",
    "load_params", "matmul", "mean_all", "mse_reduce", "mul", "no_grad", "relu", "reshape", "save_params",
    "scale", "sg", "sigmoid", "square", "stop_gradient", "sub", "sum_all", "sum_squares",
    "transpose", "upconv2d", "upsample2x",
]
