"""Tokens, disfluency spans, utterances and BIO label derivation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

STRESS_PRIMARY = "primary"
STRESS_SECONDARY = "secondary"
STRESS_NONE = "none"
STRESSES = (STRESS_NONE, STRESS_PRIMARY, STRESS_SECONDARY)

UNK_PHONE = "UNK"
FRAGMENT_MARKER = "-"

FILLED_PAUSES = frozenset({"uh", "um"})
DISCOURSE_MARKERS = frozenset({"you know", "i mean", "well", "like", "so"})

# BIO labels over reparandum/repair membership. BOTH covers tokens inside an
# outer repair and an inner reparandum at once; interregnum tokens stay O.
LABELS = ("O", "B-RM", "I-RM", "B-RP", "I-RP", "B-BOTH", "I-BOTH")
LABEL_TO_ID = {lab: i for i, lab in enumerate(LABELS)}
REPARANDUM_LABELS = frozenset({"B-RM", "I-RM", "B-BOTH", "I-BOTH"})


@dataclass
class Token:
    surface: str
    pos: str = "UNK"
    is_filled_pause: bool = False
    is_discourse_marker: bool = False
    is_fragment: bool = False
    phones: list[tuple[str, str]] = field(default_factory=list)
    start: float = 0.0
    end: float = 0.0

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"token {self.surface!r}: end {self.end} < start {self.start}")
        self.is_fragment = self.surface.endswith(FRAGMENT_MARKER)

    @property
    def core(self) -> str:
        """Surface with any trailing fragment marker removed."""
        return self.surface.rstrip(FRAGMENT_MARKER) if self.is_fragment else self.surface


def make_token(surface: str, pos: str = "UNK", **kwargs) -> Token:
    low = surface.lower()
    return Token(
        surface=surface,
        pos=pos,
        is_filled_pause=low in FILLED_PAUSES,
        is_discourse_marker=low in DISCOURSE_MARKERS,
        **kwargs,
    )


@dataclass
class DisfluencySpan:
    """Half-open token index ranges: reparandum, optional interregnum/repair."""

    reparandum: tuple[int, int]
    interregnum: tuple[int, int] | None = None
    repair: tuple[int, int] | None = None
    nesting_depth: int = 0

    def __post_init__(self):
        ranges = [self.reparandum] + [r for r in (self.interregnum, self.repair) if r is not None]
        for lo, hi in ranges:
            if lo >= hi:
                raise ValueError(f"empty or inverted range ({lo}, {hi})")
        for (_, a_hi), (b_lo, _) in zip(ranges, ranges[1:]):
            if b_lo < a_hi:
                raise ValueError("span ranges out of order")

    @property
    def interruption_point(self) -> int:
        """Index of the token right before the interruption point."""
        return self.reparandum[1] - 1

    def covers(self, idx: int) -> bool:
        lo, hi = self.reparandum
        end = (self.repair or self.interregnum or self.reparandum)[1]
        return lo <= idx < end


@dataclass
class Utterance:
    id: str
    tokens: list[Token]
    spans: list[DisfluencySpan] = field(default_factory=list)
    labels: list[str] | None = None  # explicit labels (silver); else derived

    @property
    def is_fluent(self) -> bool:
        return not self.spans

    def bio_labels(self) -> list[str]:
        if self.labels is not None:
            return list(self.labels)
        return labels_from_spans(len(self.tokens), self.spans)

    def reparandum_indices(self) -> set[int]:
        return {i for i, lab in enumerate(self.bio_labels()) if lab in REPARANDUM_LABELS}

    def pre_interruption_indices(self) -> set[int]:
        return {s.interruption_point for s in self.spans}

    def with_labels(self, labels: list[str]) -> "Utterance":
        if len(labels) != len(self.tokens):
            raise ValueError("label count != token count")
        return replace(self, labels=list(labels))


def labels_from_spans(n_tokens: int, spans: list[DisfluencySpan]) -> list[str]:
    in_rm = [False] * n_tokens
    in_rp = [False] * n_tokens
    rm_starts = set()
    for span in spans:
        rm_starts.add(span.reparandum[0])
        for i in range(*span.reparandum):
            in_rm[i] = True
        if span.repair is not None:
            for i in range(*span.repair):
                in_rp[i] = True
    labels = []
    prev_kind = None
    for i in range(n_tokens):
        if in_rm[i] and in_rp[i]:
            kind = "BOTH"
        elif in_rm[i]:
            kind = "RM"
        elif in_rp[i]:
            kind = "RP"
        else:
            kind = None
        if kind is None:
            labels.append("O")
        else:
            # New run, or back-to-back reparanda from different spans.
            fresh = kind != prev_kind or (i in rm_starts and kind == prev_kind == "RM")
            labels.append(("B-" if fresh else "I-") + kind)
        prev_kind = kind
    return labels


def is_bio_consistent(labels: list[str]) -> bool:
    prev = "O"
    for lab in labels:
        if lab.startswith("I-"):
            kind = lab[2:]
            if prev not in (f"B-{kind}", f"I-{kind}"):
                return False
        prev = lab
    return True


def repair_bio(labels: list[str]) -> list[str]:
    """Project a label sequence onto the nearest BIO-consistent one."""
    fixed = []
    prev = "O"
    for lab in labels:
        if lab.startswith("I-"):
            kind = lab[2:]
            if prev not in (f"B-{kind}", f"I-{kind}"):
                lab = f"B-{kind}"
        fixed.append(lab)
        prev = lab
    return fixed
