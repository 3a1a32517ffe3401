"""Surface-form categorization of disfluency spans."""

from __future__ import annotations

from dataclasses import dataclass

from .types import DisfluencySpan, Token, Utterance

KINDS = ("repetition", "rephrase", "restart", "nested")
LENGTH_BUCKETS = ("1-2", "3-5", "6-8", "8+")
WORD_CLASSES = ("content-content", "content-function", "function-function")

# Content words: nouns, non-auxiliary verbs, adjectives, adverbs.
_CONTENT_PREFIXES = ("NN", "VB", "JJ", "RB")
AUXILIARIES = frozenset(
    "be am is are was were been being "
    "have has had having do does did "
    "will would can could shall should may might must".split()
)


@dataclass(frozen=True)
class DisfluencyCategory:
    kind: str
    reparandum_length_bucket: str
    word_class: str


def is_content_word(token: Token) -> bool:
    if token.pos == "MD":
        return False
    if not token.pos.startswith(_CONTENT_PREFIXES):
        return False
    if token.pos.startswith("VB") and token.core.lower() in AUXILIARIES:
        return False
    return True


def length_bucket(n_tokens: int) -> str:
    if n_tokens <= 2:
        return "1-2"
    if n_tokens <= 5:
        return "3-5"
    if n_tokens <= 8:
        return "6-8"
    return "8+"


def is_repetition(span: DisfluencySpan, utt: Utterance) -> bool:
    """Reparandum equals the repair prefix, ignoring fragments."""
    if span.repair is None:
        return False
    rm = [t.core.lower() for t in utt.tokens[slice(*span.reparandum)] if not t.is_fragment]
    rp = [t.core.lower() for t in utt.tokens[slice(*span.repair)] if not t.is_fragment]
    return bool(rm) and rp[: len(rm)] == rm


def _is_nested(span: DisfluencySpan, utt: Utterance) -> bool:
    if span.nesting_depth > 0:
        return True
    lo, hi = span.reparandum[0], _end(span)
    for other in utt.spans:
        if other is span:
            continue
        if lo <= other.reparandum[0] and _end(other) <= hi:
            return True
    return False


def _end(span: DisfluencySpan) -> int:
    return (span.repair or span.interregnum or span.reparandum)[1]


def categorize(span: DisfluencySpan, utt: Utterance) -> DisfluencyCategory:
    if span.repair is None:
        kind = "restart"
    elif is_repetition(span, utt):
        kind = "repetition"
    elif _is_nested(span, utt):
        kind = "nested"
    else:
        kind = "rephrase"
    rm_tokens = utt.tokens[slice(*span.reparandum)]
    rp_tokens = utt.tokens[slice(*span.repair)] if span.repair else []
    content_rm = any(is_content_word(t) for t in rm_tokens)
    content_rp = any(is_content_word(t) for t in rp_tokens)
    if content_rm and content_rp:
        word_class = "content-content"
    elif content_rm or content_rp:
        word_class = "content-function"
    else:
        word_class = "function-function"
    return DisfluencyCategory(
        kind=kind,
        reparandum_length_bucket=length_bucket(len(rm_tokens)),
        word_class=word_class,
    )
