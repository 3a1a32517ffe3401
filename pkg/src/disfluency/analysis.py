"""Diagnostics: recall by disfluency category, word-class breakdown,
fluent-repetition false positives, innovation histograms and model diffs."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus.categorize import KINDS, LENGTH_BUCKETS, WORD_CLASSES, categorize
from .corpus.types import FILLED_PAUSES, REPARANDUM_LABELS, Utterance

HIST_LO, HIST_HI, HIST_BIN = -6.0, 6.0, 0.25
# Tokens ignored when looking for fluent repetitions.
_STOP_SURFACES = FILLED_PAUSES | {",", ".", "?", "--"}


@dataclass
class CellStats:
    gold_tokens: int = 0
    hit_tokens: int = 0

    @property
    def recall(self) -> float | None:
        return self.hit_tokens / self.gold_tokens if self.gold_tokens else None


@dataclass
class BreakdownReport:
    by_kind_bucket: dict[tuple[str, str], CellStats]
    by_word_class: dict[str, CellStats]
    word_class_share: dict[str, float]
    fluent_repetition_tokens: int
    fluent_repetition_false_positives: int

    @property
    def fluent_repetition_fp_rate(self) -> float | None:
        if self.fluent_repetition_tokens == 0:
            return None
        return self.fluent_repetition_false_positives / self.fluent_repetition_tokens

    def kind_recall(self, kind: str) -> float | None:
        gold = sum(c.gold_tokens for (k, _), c in self.by_kind_bucket.items() if k == kind)
        hit = sum(c.hit_tokens for (k, _), c in self.by_kind_bucket.items() if k == kind)
        return hit / gold if gold else None


def fluent_repetition_indices(utt: Utterance, max_len: int = 2) -> set[int]:
    """First-copy token indices of adjacent repeated n-grams (n <= max_len)
    lying entirely outside every gold span."""
    labels = utt.bio_labels()
    surfaces = [t.core.lower() for t in utt.tokens]
    flagged: set[int] = set()
    for n in range(1, max_len + 1):
        for i in range(len(surfaces) - 2 * n + 1):
            window = range(i, i + 2 * n)
            if any(labels[j] != "O" for j in window):
                continue
            if any(surfaces[j] in _STOP_SURFACES for j in window):
                continue
            if any(utt.tokens[j].is_discourse_marker for j in window):
                continue
            if surfaces[i : i + n] == surfaces[i + n : i + 2 * n]:
                flagged.update(range(i, i + n))
    return flagged


def breakdown(predictions: list[list[str]], corpus: list[Utterance]) -> BreakdownReport:
    if len(predictions) != len(corpus):
        raise ValueError("prediction/corpus length mismatch")
    by_cell = {(k, b): CellStats() for k in KINDS for b in LENGTH_BUCKETS}
    by_wc = {wc: CellStats() for wc in WORD_CLASSES}
    fluent_rep_tokens = 0
    fluent_rep_fp = 0
    for pred, utt in zip(predictions, corpus):
        if len(pred) != len(utt.tokens):
            raise ValueError(f"{utt.id}: prediction length mismatch")
        flagged = {i for i, lab in enumerate(pred) if lab in REPARANDUM_LABELS}
        for span in utt.spans:
            cat = categorize(span, utt)
            cell = by_cell[(cat.kind, cat.reparandum_length_bucket)]
            rm = range(*span.reparandum)
            cell.gold_tokens += len(rm)
            cell.hit_tokens += sum(1 for i in rm if i in flagged)
            if cat.kind == "rephrase":
                wc = by_wc[cat.word_class]
                wc.gold_tokens += len(rm)
                wc.hit_tokens += sum(1 for i in rm if i in flagged)
        fluent_rep = fluent_repetition_indices(utt)
        fluent_rep_tokens += len(fluent_rep)
        fluent_rep_fp += len(fluent_rep & flagged)
    total_wc = sum(c.gold_tokens for c in by_wc.values())
    share = {wc: (c.gold_tokens / total_wc if total_wc else 0.0) for wc, c in by_wc.items()}
    return BreakdownReport(
        by_kind_bucket=by_cell,
        by_word_class=by_wc,
        word_class_share=share,
        fluent_repetition_tokens=fluent_rep_tokens,
        fluent_repetition_false_positives=fluent_rep_fp,
    )


def render_breakdown(report: BreakdownReport) -> str:
    lines = ["kind\tbucket\tgold_tokens\trecall"]
    for (kind, bucket), cell in sorted(report.by_kind_bucket.items()):
        rec = "-" if cell.recall is None else f"{cell.recall:.3f}"
        lines.append(f"{kind}\t{bucket}\t{cell.gold_tokens}\t{rec}")
    lines.append("")
    lines.append("word_class\tshare\trecall")
    for wc, cell in report.by_word_class.items():
        rec = "-" if cell.recall is None else f"{cell.recall:.3f}"
        lines.append(f"{wc}\t{report.word_class_share[wc]:.3f}\t{rec}")
    lines.append("")
    rate = report.fluent_repetition_fp_rate
    lines.append(f"fluent_repetition_tokens\t{report.fluent_repetition_tokens}")
    lines.append(
        "fluent_repetition_fp_rate\t" + ("-" if rate is None else f"{rate:.3f}")
    )
    return "\n".join(lines)


@dataclass
class Histogram:
    edges: np.ndarray
    pre_ip: np.ndarray
    fluent: np.ndarray
    pre_ip_mean: float
    fluent_mean: float


def innovation_histogram(innovations: dict[str, np.ndarray],
                         corpus: list[Utterance], cue: int) -> Histogram:
    """Normalized histograms of one cue's innovations for tokens right before
    an interruption point vs. fluent tokens, with overflow end bins."""
    if not 0 <= cue < 21:
        raise ValueError(f"cue index {cue} out of range")
    pre_vals, fluent_vals = [], []
    for utt in corpus:
        z = innovations[utt.id]
        pre = utt.pre_interruption_indices()
        covered = set()
        for span in utt.spans:
            lo = span.reparandum[0]
            hi = (span.repair or span.interregnum or span.reparandum)[1]
            covered.update(range(lo, hi))
        for i in range(len(utt.tokens)):
            if i in pre:
                pre_vals.append(z[i, cue])
            elif i not in covered:
                fluent_vals.append(z[i, cue])
    edges = np.arange(HIST_LO, HIST_HI + HIST_BIN / 2, HIST_BIN)

    def binned(vals):
        counts = np.zeros(edges.size + 1)
        if not vals:
            return counts
        idx = np.clip(np.digitize(vals, edges), 0, edges.size)
        np.add.at(counts, idx, 1.0)
        return counts / counts.sum()

    return Histogram(
        edges=edges,
        pre_ip=binned(pre_vals),
        fluent=binned(fluent_vals),
        pre_ip_mean=float(np.mean(pre_vals)) if pre_vals else float("nan"),
        fluent_mean=float(np.mean(fluent_vals)) if fluent_vals else float("nan"),
    )


def write_histogram(hist: Histogram, path: str | Path) -> None:
    lines = ["bin_low\tbin_high\tpre_ip\tfluent"]
    lows = ["-inf"] + [f"{e:.2f}" for e in hist.edges]
    highs = [f"{e:.2f}" for e in hist.edges] + ["+inf"]
    for lo, hi, a, b in zip(lows, highs, hist.pre_ip, hist.fluent):
        lines.append(f"{lo}\t{hi}\t{a:.6f}\t{b:.6f}")
    lines.append(f"# pre_ip_mean={hist.pre_ip_mean:.6f} fluent_mean={hist.fluent_mean:.6f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class ModelDiff:
    a_better: list[str] = field(default_factory=list)
    b_better: list[str] = field(default_factory=list)
    details: dict[str, tuple[int, int]] = field(default_factory=dict)


def sentence_errors(pred: list[str], gold: list[str]) -> int:
    """Tokens whose reparandum membership is predicted wrongly."""
    return sum(
        1 for p, g in zip(pred, gold)
        if (p in REPARANDUM_LABELS) != (g in REPARANDUM_LABELS)
    )


def model_diff(pred_a: dict[str, list[str]], pred_b: dict[str, list[str]],
               corpus: list[Utterance]) -> ModelDiff:
    ids = {u.id for u in corpus}
    if set(pred_a) != ids or set(pred_b) != ids:
        raise ValueError("predictions do not cover the same corpus")
    out = ModelDiff()
    for utt in corpus:
        gold = utt.bio_labels()
        ea = sentence_errors(pred_a[utt.id], gold)
        eb = sentence_errors(pred_b[utt.id], gold)
        if ea < eb:
            out.a_better.append(utt.id)
        elif eb < ea:
            out.b_better.append(utt.id)
        if ea != eb:
            out.details[utt.id] = (ea, eb)
    return out
