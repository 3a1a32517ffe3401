"""Corpus file formats.

Transcripts: one utterance per line, `utt_id TAB annotated-text`; tokens
may carry inline POS as `surface/POS`.
Alignments: TSV `utt_id  token_index  word  start_s  end_s`, 6-decimal
seconds.
"""

from __future__ import annotations

from pathlib import Path

from .markup import parse_markup, render_markup
from .types import Utterance


def read_transcripts(path: str | Path, merge_table=()) -> list[Utterance]:
    """Token merging (multiword discourse markers) is opt-in: it changes
    token counts and would desynchronize per-token alignment files."""
    utts = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'utt_id TAB text'")
            utt_id, text = line.split("\t", 1)
            utts.append(parse_markup(text, utt_id=utt_id, merge_table=merge_table))
    return utts


def write_transcripts(utts: list[Utterance], path: str | Path, with_pos: bool = True) -> None:
    lines = [f"{u.id}\t{render_markup(u, with_pos=with_pos)}" for u in utts]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_alignments(path: str | Path) -> dict[str, list[tuple[int, str, float, float]]]:
    rows: dict[str, list[tuple[int, str, float, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 tab-separated fields")
            utt_id, idx, word, start, end = parts
            rows.setdefault(utt_id, []).append((int(idx), word, float(start), float(end)))
    for utt_id in rows:
        rows[utt_id].sort()
    return rows


def write_alignments(utts: list[Utterance], path: str | Path) -> None:
    lines = []
    for utt in utts:
        for i, tok in enumerate(utt.tokens):
            lines.append(f"{utt.id}\t{i}\t{tok.surface}\t{tok.start:.6f}\t{tok.end:.6f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def apply_alignments(utts: list[Utterance], rows: dict[str, list[tuple[int, str, float, float]]]) -> None:
    for utt in utts:
        if utt.id not in rows:
            raise KeyError(f"no alignment rows for utterance {utt.id}")
        entries = rows[utt.id]
        if len(entries) != len(utt.tokens):
            raise ValueError(
                f"{utt.id}: alignment has {len(entries)} rows for {len(utt.tokens)} tokens"
            )
        for (idx, _, start, end), tok in zip(entries, utt.tokens):
            tok.start, tok.end = start, end
