"""Reverse-mode autodiff on numpy arrays: tensors, a gradient tape, the
primitive op set, finite-difference verification, and seeded rng streams."""

from .gradcheck import check_parameter_gradients, grad_check, primitive_checks
from .ops import (
    abs_,
    adaptive_avg_pool1d,
    adaptive_max_pool1d,
    add,
    add_bias,
    clamp_min,
    concat,
    conv1d,
    conv2d,
    cosine_similarity,
    flatten,
    layer_norm,
    log,
    matmul,
    max_,
    mean,
    mul,
    neg,
    pairwise_absdiff,
    permute,
    relu,
    reshape,
    scale_rows,
    sigmoid,
    softmax_rows,
    sub,
    sum_,
    take_row,
    transpose,
)
from .rng import (
    STREAM_AUGMENT,
    STREAM_CHECK,
    STREAM_INIT,
    STREAM_SHUFFLE,
    STREAM_SYNTH,
    make_rng,
)
from .tensor import (
    NumericError,
    ShapeError,
    Tape,
    Tensor,
    active_tape,
    backward,
    checked_mode,
    default_dtype,
    set_default_dtype,
    using_dtype,
)

__all__ = [
    "Tensor",
    "Tape",
    "backward",
    "active_tape",
    "ShapeError",
    "NumericError",
    "checked_mode",
    "default_dtype",
    "set_default_dtype",
    "using_dtype",
    "grad_check",
    "check_parameter_gradients",
    "primitive_checks",
    "make_rng",
    "STREAM_INIT",
    "STREAM_SHUFFLE",
    "STREAM_AUGMENT",
    "STREAM_SYNTH",
    "STREAM_CHECK",
    "add",
    "sub",
    "mul",
    "neg",
    "abs_",
    "sigmoid",
    "relu",
    "log",
    "clamp_min",
    "sum_",
    "mean",
    "max_",
    "reshape",
    "flatten",
    "permute",
    "transpose",
    "concat",
    "take_row",
    "matmul",
    "add_bias",
    "scale_rows",
    "pairwise_absdiff",
    "softmax_rows",
    "layer_norm",
    "cosine_similarity",
    "adaptive_avg_pool1d",
    "adaptive_max_pool1d",
    "conv1d",
    "conv2d",
]
