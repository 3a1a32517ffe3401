"""Remap disfluency annotations onto corrected transcripts.

Tokens the correction left alone keep their original labels; tokens in
changed regions are relabeled by a trained text-only tagger. The result is
projected back to a BIO-consistent sequence.
"""

from __future__ import annotations

from .align import MATCH, align_tokens
from .types import Token, Utterance, repair_bio


def silver_remap(original: Utterance, corrected_tokens: list[Token], tagger) -> Utterance:
    """`tagger` is any object with predict_labels(utterance) -> list[str]."""
    if not corrected_tokens:
        raise ValueError("corrected transcript is empty")
    ops = align_tokens(
        [t.surface for t in original.tokens],
        [t.surface for t in corrected_tokens],
    )
    orig_labels = original.bio_labels()
    silver: list[str | None] = [None] * len(corrected_tokens)
    for op in ops:
        if op.op == MATCH:
            silver[op.corr_index] = orig_labels[op.orig_index]

    corrected = Utterance(id=original.id, tokens=list(corrected_tokens), spans=[])
    if any(lab is None for lab in silver):
        predicted = tagger.predict_labels(corrected)
        silver = [lab if lab is not None else predicted[i] for i, lab in enumerate(silver)]
    return corrected.with_labels(repair_bio([str(lab) for lab in silver]))
