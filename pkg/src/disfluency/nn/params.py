"""Named parameter store with Adam state and a self-describing model file.

The on-disk container is a .npz holding every named array plus a JSON
metadata entry (format version and a config echo). float64 arrays
round-trip bit-exactly through np.savez, which is what the determinism
contract needs.
"""

from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np

from .tensor import Tensor

FORMAT_VERSION = 1
_META_KEY = "__meta__"
_CONST_PREFIX = "const::"


class ParameterStore:
    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self._step = 0

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self.params:
            raise ValueError(f"duplicate parameter name: {name}")
        self.params[name] = np.asarray(value, dtype=np.float64)

    def names(self) -> list[str]:
        return list(self.params)

    def tensors(self) -> dict[str, Tensor]:
        """Fresh leaf tensors sharing the stored arrays (one graph's worth)."""
        return {name: Tensor(arr) for name, arr in self.params.items()}

    def copy_values(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for k, v in values.items():
            self.params[k] = v.copy()

    def adam_step(self, grads: dict[str, np.ndarray], lr: float = 1e-3,
                  beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        """One Adam update with bias correction. Parameters without a
        gradient entry (or with a None gradient) are left untouched."""
        live = {k: g for k, g in grads.items() if g is not None}
        for name, g in live.items():
            if name not in self.params:
                raise KeyError(f"gradient for unknown parameter: {name}")
            if g.shape != self.params[name].shape:
                raise ValueError(f"gradient shape mismatch for {name}")
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient for parameter {name}")
        self._step += 1
        t = self._step
        for name, g in live.items():
            m = self._m.setdefault(name, np.zeros_like(self.params[name]))
            v = self._v.setdefault(name, np.zeros_like(self.params[name]))
            m += (1.0 - beta1) * (g - m)
            v += (1.0 - beta2) * (g * g - v)
            m_hat = m / (1.0 - beta1**t)
            v_hat = v / (1.0 - beta2**t)
            self.params[name] -= lr * m_hat / (np.sqrt(v_hat) + eps)

    def save(self, path: str | Path, config: dict | None = None,
             constants: dict[str, np.ndarray] | None = None) -> None:
        """Write params (+ untrained constant arrays) with a JSON config echo."""
        meta = {"format_version": FORMAT_VERSION, "config": config or {}}
        arrays = dict(self.params)
        for name, arr in (constants or {}).items():
            arrays[f"{_CONST_PREFIX}{name}"] = np.asarray(arr, dtype=np.float64)
        arrays[_META_KEY] = np.frombuffer(
            json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8
        )
        buf = io.BytesIO()
        np.savez(buf, **arrays)
        Path(path).write_bytes(buf.getvalue())

    @classmethod
    def load(cls, path: str | Path) -> tuple["ParameterStore", dict, dict[str, np.ndarray]]:
        with np.load(Path(path)) as data:
            if _META_KEY not in data:
                raise ValueError(f"{path}: not a model file (missing metadata)")
            meta = json.loads(bytes(data[_META_KEY]).decode("utf-8"))
            if meta.get("format_version") != FORMAT_VERSION:
                raise ValueError(f"{path}: unsupported format version {meta.get('format_version')}")
            store = cls()
            constants: dict[str, np.ndarray] = {}
            for name in data.files:
                if name == _META_KEY:
                    continue
                if name.startswith(_CONST_PREFIX):
                    constants[name[len(_CONST_PREFIX):]] = data[name]
                else:
                    store.add(name, data[name])
        return store, meta.get("config", {}), constants


def init_linear(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """Uniform +-1/sqrt(fan_in) matrix init."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def add_lstm(store: ParameterStore, rng: np.random.Generator, prefix: str,
             d_in: int, hidden: int) -> None:
    """Register bidirectional LSTM parameters under `prefix`.

    Biases start at zero except the forget gate, which starts at +1.
    """
    for side in ("fw", "bw"):
        store.add(f"{prefix}.{side}.w", init_linear(rng, d_in, 4 * hidden))
        store.add(f"{prefix}.{side}.u", init_linear(rng, hidden, 4 * hidden))
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = 1.0
        store.add(f"{prefix}.{side}.b", b)


def grads_of(tensors: dict[str, Tensor]) -> dict[str, np.ndarray]:
    return {name: t.grad for name, t in tensors.items() if t.grad is not None}
