"""Bracket markup for disfluency annotation.

A disfluency is written `[ reparandum + { interregnum } repair ]`; the
interregnum and repair are optional and spans may nest. Tokens are
whitespace separated; bracket and brace characters bind even when glued to
a word. A token may carry an inline POS tag as `surface/POS`.
"""

from __future__ import annotations

import re

from .types import DisfluencySpan, Token, Utterance, make_token

_TOKEN_RE = re.compile(r"[\[\]{}]|[^\s\[\]{}]+")

# Adjacent words merged into one token before span parsing (case-insensitive).
# Merging changes token counts, so it is opt-in: corpora with external
# per-token alignment files must parse unmerged.
DEFAULT_MERGE_TABLE = (("you", "know"), ("i", "mean"))


class MarkupError(ValueError):
    """Malformed disfluency markup; carries the character offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at char {offset})")
        self.offset = offset


def _lex(line: str) -> list[tuple[str, int]]:
    return [(m.group(0), m.start()) for m in _TOKEN_RE.finditer(line)]


def _merge_markers(items: list[tuple[str, int]], table) -> list[tuple[str, int]]:
    merged = []
    i = 0
    keys = {tuple(k) for k in table}
    max_len = max((len(k) for k in keys), default=0)
    while i < len(items):
        hit = None
        for n in range(max_len, 1, -1):
            window = items[i : i + n]
            if len(window) < n or any(w in "[]{}+" for w, _ in window):
                continue
            surfaces = tuple(_split_pos(w)[0].lower() for w, _ in window)
            if surfaces in keys:
                hit = n
                break
        if hit:
            text = " ".join(_split_pos(w)[0] for w, _ in items[i : i + hit])
            merged.append((text + _pos_suffix(items[i][0]), items[i][1]))
            i += hit
        else:
            merged.append(items[i])
            i += 1
    return merged


def _split_pos(word: str) -> tuple[str, str]:
    if "/" in word[1:]:
        surface, _, pos = word.rpartition("/")
        if surface and pos:
            return surface, pos
    return word, "UNK"


def _pos_suffix(word: str) -> str:
    _, pos = _split_pos(word)
    return f"/{pos}" if pos != "UNK" else ""


def parse_markup(line: str, utt_id: str = "", merge_table=()) -> Utterance:
    items = _merge_markers(_lex(line), merge_table or ())
    tokens: list[Token] = []
    spans: list[DisfluencySpan] = []
    # Stack frames: [rm_start, rm_end, ir_start, ir_end, phase, open_offset]
    stack: list[list] = []

    for text, offset in items:
        idx = len(tokens)
        if text == "[":
            if stack and stack[-1][4] == "ir":
                raise MarkupError("span inside interregnum", offset)
            stack.append([idx, None, None, None, "rm", offset])
        elif text == "+":
            if not stack:
                raise MarkupError("'+' outside brackets", offset)
            frame = stack[-1]
            if frame[4] != "rm":
                raise MarkupError("duplicate '+' in span", offset)
            if frame[0] == idx:
                raise MarkupError("empty reparandum", offset)
            frame[1] = idx
            frame[4] = "post"
        elif text == "{":
            if not stack or stack[-1][4] != "post" or stack[-1][2] is not None:
                raise MarkupError("unexpected '{'", offset)
            if stack[-1][1] != idx:
                raise MarkupError("interregnum must directly follow '+'", offset)
            stack[-1][2] = idx
            stack[-1][4] = "ir"
        elif text == "}":
            if not stack or stack[-1][4] != "ir":
                raise MarkupError("unexpected '}'", offset)
            stack[-1][3] = idx
            stack[-1][4] = "post"
        elif text == "]":
            if not stack:
                raise MarkupError("unbalanced ']'", offset)
            frame = stack.pop()
            rm_start, rm_end, ir_start, ir_end, phase, _ = frame
            if phase == "ir":
                raise MarkupError("unclosed '{' in span", offset)
            if phase == "rm":
                raise MarkupError("span closed without '+'", offset)
            interregnum = None
            if ir_start is not None and ir_end > ir_start:
                interregnum = (ir_start, ir_end)
            repair_start = ir_end if ir_end is not None else rm_end
            repair = (repair_start, idx) if idx > repair_start else None
            spans.append(
                DisfluencySpan(
                    reparandum=(rm_start, rm_end),
                    interregnum=interregnum,
                    repair=repair,
                    nesting_depth=len(stack),
                )
            )
        else:
            surface, pos = _split_pos(text)
            tokens.append(make_token(surface, pos))

    if stack:
        raise MarkupError("unbalanced '['", stack[-1][5])
    spans.sort(key=_canonical_order)
    return Utterance(id=utt_id, tokens=tokens, spans=spans)


def _canonical_order(span: DisfluencySpan):
    # Outer spans first: wider extent, then wider reparandum.
    return (span.reparandum[0], -_span_end(span), -span.reparandum[1])


def _span_end(span: DisfluencySpan) -> int:
    if span.repair is not None:
        return span.repair[1]
    if span.interregnum is not None:
        return span.interregnum[1]
    return span.reparandum[1]


def render_markup(utt: Utterance, with_pos: bool = False) -> str:
    """Inverse of parse_markup; parse(render(u)) reproduces u."""
    spans = sorted(utt.spans, key=_canonical_order)
    children: dict[int, list[DisfluencySpan]] = {id(s): [] for s in spans}
    roots: list[DisfluencySpan] = []
    open_stack: list[DisfluencySpan] = []
    for span in spans:  # outer-first order makes containment a stack walk
        while open_stack and not _contains(open_stack[-1], span):
            open_stack.pop()
        (children[id(open_stack[-1])] if open_stack else roots).append(span)
        open_stack.append(span)

    def token_text(i: int) -> str:
        tok = utt.tokens[i]
        if with_pos and tok.pos != "UNK":
            return f"{tok.surface}/{tok.pos}"
        return tok.surface

    def emit_range(lo: int, hi: int, inside: list[DisfluencySpan]) -> list[str]:
        starts: dict[int, DisfluencySpan] = {}
        for s in inside:
            starts.setdefault(s.reparandum[0], s)  # outermost wins
        out: list[str] = []
        i = lo
        while i < hi:
            span = starts.get(i)
            if span is not None:
                out.extend(emit_span(span))
                i = _span_end(span)
            else:
                out.append(token_text(i))
                i += 1
        return out

    def emit_span(span: DisfluencySpan) -> list[str]:
        kids = children[id(span)]
        out = ["["]
        out += emit_range(*span.reparandum, [k for k in kids if k.reparandum[0] < span.reparandum[1]])
        out.append("+")
        if span.interregnum is not None:
            out += ["{"] + [token_text(i) for i in range(*span.interregnum)] + ["}"]
        if span.repair is not None:
            out += emit_range(*span.repair, [k for k in kids if k.reparandum[0] >= span.repair[0]])
        out.append("]")
        return out

    return " ".join(emit_range(0, len(utt.tokens), roots))


def _contains(outer: DisfluencySpan, inner: DisfluencySpan) -> bool:
    return (
        outer.reparandum[0] <= inner.reparandum[0]
        and _span_end(inner) <= _span_end(outer)
    )
