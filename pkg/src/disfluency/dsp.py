"""Frame-level acoustic features and word-level averaging.

Frames are 25 ms with 10 ms hops. Per frame we compute three pitch
features (NCCF, voicing-weighted log pitch, delta log pitch), three log
energies (total, lower 20 mel bands, upper 20 mel bands) and 13 MFCCs,
19 values in all. The pitch tracker is a plain normalized-autocorrelation
search over the 60-400 Hz lag range; it is a stand-in, not a port of any
particular toolkit.

Energy sums are taken from the un-pre-emphasized signal; the MFCC path
applies 0.97 pre-emphasis. Both paths use a Hamming window.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FRAME_LEN_S = 0.025
FRAME_HOP_S = 0.010
N_MEL = 40
N_MFCC = 13
LOG_FLOOR = 1e-10
F0_MIN, F0_MAX = 60.0, 400.0
VOICING_THRESHOLD = 0.3
DEFAULT_F0 = 100.0  # used only when no frame is ever voiced
PREEMPHASIS = 0.97

FRAME_COLUMNS = (
    "nccf", "pov_log_pitch", "delta_log_pitch",
    "log_energy_total", "log_energy_low20", "log_energy_high20",
) + tuple(f"mfcc_{i:02d}" for i in range(N_MFCC))


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.samples.ndim != 1:
            raise ValueError("mono audio only")


@dataclass
class FrameFeatures:
    values: np.ndarray  # (n_frames, 19), columns as in FRAME_COLUMNS
    frame_hop: float = FRAME_HOP_S
    frame_len: float = FRAME_LEN_S

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    def frame_center(self, t: int) -> float:
        return t * self.frame_hop + self.frame_len / 2.0


def read_wav(path: str | Path) -> Waveform:
    """16-bit PCM mono 16 kHz only; resampling is out of scope."""
    with wave.open(str(path), "rb") as wf:
        if wf.getnchannels() != 1:
            raise ValueError(f"{path}: expected mono audio, got {wf.getnchannels()} channels")
        if wf.getsampwidth() != 2:
            raise ValueError(f"{path}: expected 16-bit PCM")
        if wf.getframerate() != 16000:
            raise ValueError(f"{path}: expected 16 kHz, got {wf.getframerate()}")
        raw = wf.readframes(wf.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(samples, 16000)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_fft: int, sample_rate: float, n_mel: int = N_MEL) -> np.ndarray:
    """Triangular filters on the mel scale covering [0, Nyquist]."""
    nyquist = sample_rate / 2.0
    mel_points = np.linspace(hz_to_mel(0.0), hz_to_mel(nyquist), n_mel + 2)
    hz_points = mel_to_hz(mel_points)
    bins = np.linspace(0.0, nyquist, n_fft // 2 + 1)
    bank = np.zeros((n_mel, bins.size))
    for b in range(n_mel):
        left, center, right = hz_points[b], hz_points[b + 1], hz_points[b + 2]
        up = (bins - left) / (center - left)
        down = (right - bins) / (right - center)
        bank[b] = np.maximum(0.0, np.minimum(up, down))
    return bank


def dct_matrix(n_out: int = N_MFCC, n_in: int = N_MEL) -> np.ndarray:
    """First n_out rows of the orthonormal DCT-II."""
    n = np.arange(n_in)
    mat = np.cos(np.pi * np.outer(np.arange(n_out), (n + 0.5)) / n_in)
    mat *= np.sqrt(2.0 / n_in)
    mat[0] *= np.sqrt(0.5)
    return mat


def _nccf(frame: np.ndarray, lag_min: int, lag_max: int) -> tuple[float, int]:
    """Max normalized autocorrelation over the lag range, and its lag.

    The returned lag is the shortest one within a small margin of the max,
    which resolves octave ties on strongly periodic frames.
    """
    n = frame.size
    if float(np.dot(frame, frame)) <= 0.0:
        return 0.0, 0
    lags = range(lag_min, min(lag_max, n - 1) + 1)
    vals = np.full(len(lags), -np.inf)
    for k, lag in enumerate(lags):
        a = frame[: n - lag]
        b = frame[lag:]
        denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
        if denom > 0.0:
            vals[k] = np.dot(a, b) / denom
    best_val = float(vals.max())
    if best_val <= 0.0:
        return max(best_val, -1.0), 0
    chosen = int(np.argmax(vals >= best_val - 1e-4))
    return best_val, lag_min + chosen


def compute_frame_features(w: Waveform) -> FrameFeatures:
    rate = w.sample_rate
    frame_len = int(round(FRAME_LEN_S * rate))
    hop = int(round(FRAME_HOP_S * rate))
    if w.samples.size < frame_len:
        raise ValueError(
            f"audio too short: {w.samples.size} samples < one frame ({frame_len})"
        )
    n_frames = (w.samples.size - frame_len) // hop + 1

    window = np.hamming(frame_len)
    n_fft = 1
    while n_fft < frame_len:
        n_fft *= 2
    bank = mel_filterbank(n_fft, rate)
    dct = dct_matrix()
    lag_min = max(1, int(np.floor(rate / F0_MAX)))
    lag_max = int(np.ceil(rate / F0_MIN))

    values = np.zeros((n_frames, len(FRAME_COLUMNS)))
    nccf_vals = np.zeros(n_frames)
    lags = np.zeros(n_frames, dtype=int)
    for t in range(n_frames):
        seg = w.samples[t * hop : t * hop + frame_len]

        # Energy path: no pre-emphasis.
        values[t, 3] = np.log(max(float(np.dot(seg, seg)), LOG_FLOOR))
        spec_e = np.abs(np.fft.rfft(seg * window, n_fft)) ** 2
        mel_e = bank @ spec_e
        values[t, 4] = np.log(max(float(mel_e[: N_MEL // 2].sum()), LOG_FLOOR))
        values[t, 5] = np.log(max(float(mel_e[N_MEL // 2 :].sum()), LOG_FLOOR))

        # MFCC path: pre-emphasis then window.
        pre = np.empty_like(seg)
        pre[0] = seg[0]
        pre[1:] = seg[1:] - PREEMPHASIS * seg[:-1]
        spec_m = np.abs(np.fft.rfft(pre * window, n_fft)) ** 2
        log_mel = np.log(np.maximum(bank @ spec_m, LOG_FLOOR))
        values[t, 6:] = dct @ log_mel

        nccf_vals[t], lags[t] = _nccf(seg, lag_min, lag_max)
        values[t, 0] = nccf_vals[t]

    # Pitch contour: unvoiced frames carry the last voiced f0 forward.
    f0 = np.full(n_frames, DEFAULT_F0)
    voiced = (nccf_vals >= VOICING_THRESHOLD) & (lags > 0)
    if np.any(voiced):
        first = int(np.argmax(voiced))
        current = rate / lags[first]
        for t in range(n_frames):
            if voiced[t]:
                current = rate / lags[t]
            f0[t] = current if t >= first else rate / lags[first]
    log_f0 = np.log(f0)
    pov = np.maximum(0.0, nccf_vals) ** 2
    values[:, 1] = pov * log_f0
    for t in range(n_frames):
        lo = max(0, t - 1)
        hi = min(n_frames - 1, t + 1)
        values[t, 2] = (log_f0[hi] - log_f0[lo]) / 2.0

    return FrameFeatures(values)


def word_average(frames: FrameFeatures, start: float, end: float) -> np.ndarray:
    """Mean of frame values whose centers land in [start, end).

    Falls back to the single nearest frame when the span is too short to
    contain a frame center.
    """
    centers = np.array([frames.frame_center(t) for t in range(frames.n_frames)])
    mask = (centers >= start) & (centers < end)
    if not np.any(mask):
        nearest = int(np.argmin(np.abs(centers - (start + end) / 2.0)))
        return frames.values[nearest].copy()
    return frames.values[mask].mean(axis=0)


def write_frame_features(frames: FrameFeatures, path: str | Path) -> None:
    lines = ["\t".join(FRAME_COLUMNS)]
    for row in frames.values:
        lines.append("\t".join(f"{v:.6f}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_frame_features(path: str | Path) -> FrameFeatures:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != FRAME_COLUMNS:
            raise ValueError(f"{path}: unexpected frame-feature header")
        rows = [[float(x) for x in line.split("\t")] for line in fh if line.strip()]
    return FrameFeatures(np.array(rows, dtype=np.float64).reshape(-1, len(FRAME_COLUMNS)))
