"""Per-word prosodic cue vectors.

Each word gets 21 cues in a fixed order:

    0      pause_scaled   min(1, ln(1 + pause-before-word)), in [0, 1]
    1      duration       raw end - start, seconds
    2-4    f0             nccf, voicing-weighted log pitch, delta log pitch
    5-7    energy         log total, log lower-20 mel bands, log upper-20
    8-20   mfcc           13 coefficients

Cues 2-20 are word-level means of the frame features. No word- or
phone-conditioned duration normalization is applied anywhere; unusual
durations are exactly what the downstream innovation features detect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus.types import Utterance
from .dsp import FrameFeatures, word_average

N_CUES = 21
PAUSE, DURATION = 0, 1
CUE_NAMES = ("pause_scaled", "duration",
             "nccf", "pov_log_pitch", "delta_log_pitch",
             "log_energy_total", "log_energy_low20", "log_energy_high20",
             ) + tuple(f"mfcc_{i:02d}" for i in range(13))

# Cues fed to tanh prediction heads get standardized; pause and duration
# feed softplus heads and pass through raw.
STANDARDIZED_SLICE = slice(2, N_CUES)


def pause_scale(r: float) -> float:
    if r < 0:
        raise ValueError(f"pause must be nonnegative, got {r}")
    return min(1.0, math.log1p(r))


def assemble_cues(utt: Utterance, frames: FrameFeatures,
                  utterance_start: float | None = None) -> tuple[np.ndarray, int]:
    """Cue matrix (T, 21) for one utterance, plus a clamped-pause count.

    Pauses are gaps between consecutive word alignments; the first word's
    pause is measured from `utterance_start` (its own start when None,
    which makes the first pause 0). Negative gaps from overlapping
    alignments clamp to 0 and are counted.
    """
    T = len(utt.tokens)
    cues = np.zeros((T, N_CUES))
    clamped = 0
    prev_end = utterance_start if utterance_start is not None else (
        utt.tokens[0].start if utt.tokens else 0.0
    )
    for i, tok in enumerate(utt.tokens):
        gap = tok.start - prev_end
        if gap < 0:
            clamped += 1
            gap = 0.0
        cues[i, PAUSE] = pause_scale(gap)
        cues[i, DURATION] = tok.end - tok.start
        cues[i, 2:] = word_average(frames, tok.start, tok.end)
        prev_end = tok.end
    return np.round(cues, 6), clamped


@dataclass
class CueStandardizer:
    mean: np.ndarray
    std: np.ndarray
    scale_divisor: float = 3.0

    def apply(self, cues: np.ndarray) -> np.ndarray:
        out = np.array(cues, dtype=np.float64, copy=True)
        sl = STANDARDIZED_SLICE
        out[..., sl] = (out[..., sl] - self.mean[sl]) / (self.scale_divisor * self.std[sl])
        return out

    def invert(self, standardized: np.ndarray) -> np.ndarray:
        out = np.array(standardized, dtype=np.float64, copy=True)
        sl = STANDARDIZED_SLICE
        out[..., sl] = out[..., sl] * (self.scale_divisor * self.std[sl]) + self.mean[sl]
        return out

    def to_arrays(self) -> dict[str, np.ndarray]:
        return {"mean": self.mean, "std": self.std,
                "scale_divisor": np.array([self.scale_divisor])}

    @classmethod
    def from_arrays(cls, arrays) -> "CueStandardizer":
        return cls(mean=np.asarray(arrays["mean"]), std=np.asarray(arrays["std"]),
                   scale_divisor=float(np.asarray(arrays["scale_divisor"])[0]))


def fit_standardizer(cue_rows: np.ndarray, scale_divisor: float = 3.0) -> CueStandardizer:
    """Fit on the pooled cue rows of fluent training utterances."""
    rows = np.asarray(cue_rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 2 or rows.shape[1] != N_CUES:
        raise ValueError("need at least two 21-dim cue rows to fit a standardizer")
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    floor = 1e-10 * (1.0 + np.abs(mean))
    dead = [CUE_NAMES[k] for k in range(*STANDARDIZED_SLICE.indices(N_CUES)) if std[k] <= floor[k]]
    if dead:
        raise ValueError(f"zero-variance cue(s): {', '.join(dead)}")
    return CueStandardizer(mean=mean, std=std, scale_divisor=scale_divisor)


def write_cues(cues: dict[str, np.ndarray], path: str | Path) -> None:
    lines = []
    for utt_id, mat in cues.items():
        for i, row in enumerate(mat):
            vals = "\t".join(f"{v:.6f}" for v in row)
            lines.append(f"{utt_id}\t{i}\t{vals}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_cues(path: str | Path) -> dict[str, np.ndarray]:
    rows: dict[str, list[tuple[int, list[float]]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 + N_CUES:
                raise ValueError(f"{path}:{lineno}: expected {2 + N_CUES} fields")
            rows.setdefault(parts[0], []).append((int(parts[1]), [float(x) for x in parts[2:]]))
    out = {}
    for utt_id, entries in rows.items():
        entries.sort()
        out[utt_id] = np.array([vals for _, vals in entries], dtype=np.float64)
    return out
