from .tensor import (
    Tensor,
    add,
    as_tensor,
    bilstm,
    cols,
    concat,
    div,
    dropout,
    exp,
    flip,
    gaussian_nll,
    log,
    lstm_sequence,
    matmul,
    mean,
    mul,
    rows,
    scale,
    sigmoid,
    softplus,
    sqrt,
    square,
    sub,
    tanh,
    tsum,
)
from .crf import NEG_INF, crf_gold_score, crf_log_partition, crf_nll, crf_viterbi
from .gradcheck import GradCheckReport, gradient_check
from .params import FORMAT_VERSION, ParameterStore, add_lstm, grads_of, init_linear

__all__ = [
    "Tensor", "add", "as_tensor", "bilstm", "cols", "concat", "div", "dropout",
    "exp", "flip", "gaussian_nll", "log", "lstm_sequence", "matmul", "mean",
    "mul", "rows", "scale", "sigmoid", "softplus", "sqrt", "square", "sub", "tanh",
    "tsum", "NEG_INF", "crf_gold_score", "crf_log_partition", "crf_nll",
    "crf_viterbi", "GradCheckReport", "gradient_check", "FORMAT_VERSION",
    "ParameterStore", "add_lstm", "grads_of", "init_linear",
]
