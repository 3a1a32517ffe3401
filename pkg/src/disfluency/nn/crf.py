"""Linear-chain CRF: log-partition, gold-path score, NLL and Viterbi.

Transition, start and stop scores live in a CrfParams view over named
arrays. Illegal transitions are held at NEG_INF; their partial derivatives
vanish (exp(NEG_INF + anything finite) == 0), so masked entries never move
during training.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

NEG_INF = -1e30


def _logsumexp(a: np.ndarray, axis=None):
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return float(out.reshape(())) if axis is None else np.squeeze(out, axis=axis)


def _forward_backward(e, trans, start, stop):
    T, L = e.shape
    alpha = np.empty((T, L))
    alpha[0] = start + e[0]
    for t in range(1, T):
        alpha[t] = _logsumexp(alpha[t - 1][:, None] + trans, axis=0) + e[t]
    beta = np.empty((T, L))
    beta[T - 1] = stop
    for t in range(T - 2, -1, -1):
        beta[t] = _logsumexp(trans + (e[t + 1] + beta[t + 1])[None, :], axis=1)
    log_z = float(_logsumexp(alpha[T - 1] + stop))
    return alpha, beta, log_z


def crf_log_partition(emissions: Tensor, trans: Tensor, start: Tensor, stop: Tensor) -> Tensor:
    """log sum over all label paths of exp(path score). Fused op."""
    e = emissions.data
    T, L = e.shape
    if T < 1:
        raise ValueError("crf_log_partition requires at least one step")
    alpha, beta, log_z = _forward_backward(e, trans.data, start.data, stop.data)
    out = Tensor(log_z, parents=(emissions, trans, start, stop))

    def bw(g):
        g = float(g)
        # Unary marginals P(y_t = j).
        unary = np.exp(alpha + beta - log_z)
        emissions._accum(g * unary)
        start._accum(g * unary[0])
        stop._accum(g * unary[T - 1])
        if T > 1:
            pair = np.zeros((L, L))
            for t in range(T - 1):
                pair += np.exp(
                    alpha[t][:, None]
                    + trans.data
                    + (e[t + 1] + beta[t + 1])[None, :]
                    - log_z
                )
            trans._accum(g * pair)
        else:
            trans._accum(np.zeros((L, L)))

    out._backward = bw
    return out


def crf_gold_score(emissions: Tensor, trans: Tensor, start: Tensor, stop: Tensor, path) -> Tensor:
    """Score of one label path. Fused op with a scatter backward."""
    path = np.asarray(path, dtype=np.intp)
    T, L = emissions.data.shape
    if path.shape[0] != T:
        raise ValueError(f"path length {path.shape[0]} != sequence length {T}")
    if np.any(path < 0) or np.any(path >= L):
        raise ValueError("label index out of range")
    score = emissions.data[np.arange(T), path].sum() + start.data[path[0]] + stop.data[path[-1]]
    if T > 1:
        score += trans.data[path[:-1], path[1:]].sum()
    out = Tensor(score, parents=(emissions, trans, start, stop))

    def bw(g):
        g = float(g)
        de = np.zeros((T, L))
        de[np.arange(T), path] = g
        emissions._accum(de)
        ds = np.zeros(L)
        ds[path[0]] = g
        start._accum(ds)
        dp = np.zeros(L)
        dp[path[-1]] = g
        stop._accum(dp)
        dt = np.zeros((L, L))
        if T > 1:
            np.add.at(dt, (path[:-1], path[1:]), g)
        trans._accum(dt)

    out._backward = bw
    return out


def crf_nll(emissions: Tensor, trans: Tensor, start: Tensor, stop: Tensor, gold) -> Tensor:
    """Negative log-likelihood of the gold path: logZ - score(gold)."""
    return crf_log_partition(emissions, trans, start, stop) - crf_gold_score(
        emissions, trans, start, stop, gold
    )


def crf_viterbi(emissions: np.ndarray, trans: np.ndarray, start: np.ndarray, stop: np.ndarray) -> list[int]:
    """Best label path; ties break toward the lowest label index."""
    e = np.asarray(emissions, dtype=np.float64)
    T, L = e.shape
    if T < 1:
        raise ValueError("crf_viterbi requires at least one step")
    delta = start + e[0]
    back = np.zeros((T, L), dtype=np.intp)
    for t in range(1, T):
        cand = delta[:, None] + trans
        back[t] = np.argmax(cand, axis=0)  # argmax picks the lowest index on ties
        delta = cand[back[t], np.arange(L)] + e[t]
    delta = delta + stop
    best = int(np.argmax(delta))
    path = [best]
    for t in range(T - 1, 0, -1):
        best = int(back[t, best])
        path.append(best)
    path.reverse()
    return path
