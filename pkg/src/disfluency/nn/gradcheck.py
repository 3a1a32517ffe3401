"""Finite-difference verification of analytic gradients.

The checker perturbs every entry of every parameter by +-h, recomputes the
loss, and compares the central difference against the gradient produced by
backward(). Losses must be deterministic functions of the parameters
(evaluate with dropout disabled).

Per-entry relative error uses a denominator floored at the parameter's own
gradient scale: entries whose true gradient sits at the finite-difference
noise floor are then judged on scaled absolute error, while an error on an
at-scale entry still shows up as an at-scale relative error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .params import ParameterStore
from .tensor import Tensor

LossFn = Callable[[dict[str, Tensor]], Tensor]


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_param: dict[str, float] = field(default_factory=dict)
    tolerance: float = 1e-4

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        worst = max(self.per_param, key=self.per_param.get) if self.per_param else "-"
        return (
            f"gradient check {status}: max rel error {self.max_rel_error:.3e} "
            f"(tol {self.tolerance:.0e}, worst {worst})"
        )


def gradient_check(loss_fn: LossFn, store: ParameterStore, tolerance: float = 1e-4,
                   h: float = 1e-5) -> GradCheckReport:
    tensors = store.tensors()
    loss = loss_fn(tensors)
    if loss.data.size != 1 or not np.isfinite(loss.data):
        raise ValueError("gradient check requires a finite scalar loss")
    loss.backward()
    analytic = {name: (t.grad if t.grad is not None else np.zeros_like(t.data))
                for name, t in tensors.items()}

    per_param: dict[str, float] = {}
    for name, arr in store.params.items():
        flat = arr.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        numeric = np.empty_like(a_flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(loss_fn(store.tensors()).data)
            flat[i] = orig - h
            down = float(loss_fn(store.tensors()).data)
            flat[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise ValueError(f"non-finite loss while perturbing {name}")
            numeric[i] = (up - down) / (2.0 * h)
        scale = max(np.max(np.abs(a_flat), initial=0.0),
                    np.max(np.abs(numeric), initial=0.0), 1e-8)
        denom = np.maximum(np.abs(a_flat) + np.abs(numeric), scale)
        per_param[name] = float(np.max(np.abs(a_flat - numeric) / denom))
    max_err = max(per_param.values()) if per_param else 0.0
    return GradCheckReport(max_rel_error=max_err, per_param=per_param, tolerance=tolerance)
