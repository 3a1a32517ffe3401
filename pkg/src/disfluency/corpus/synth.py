"""Deterministic synthetic corpus for desk-scale validation.

Sentences come from a small template grammar over a POS-tagged vocabulary.
Disfluencies are injected with gold spans; several constructions are
deliberately token-identical between their fluent and disfluent readings
(emphatic doubling vs. a repetition, noun lists vs. a content rephrase,
complement clauses vs. an abandoned restart), so text alone cannot fully
separate them.

Each token gets a 21-dim cue vector sampled from its POS's population
Gaussian. The word right before every interruption point has its duration
and pause shifted up by delta population sigmas and its energy cues down
by the same amount; everything else is untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .lexicon import Lexicon
from .types import DisfluencySpan, Token, Utterance, make_token

N_CUES = 21
PAUSE, DURATION = 0, 1
ENERGY_CUES = (5, 6, 7)


class ConfigError(ValueError):
    pass


@dataclass
class SynthConfig:
    n_sentences: int = 1000
    disfluency_rate: float = 0.45
    category_mix: dict[str, float] = field(
        default_factory=lambda: {"repetition": 0.40, "rephrase": 0.30, "restart": 0.20, "nested": 0.10}
    )
    delta: float = 2.0
    # Fluent prosodic events the text cannot predict: phrase-boundary
    # lengthening (same cue signature as a hesitation) and emphasis. They
    # make prosody alone imprecise, like real speech.
    confuser_rate: float = 0.10
    confuser_magnitude: tuple[float, float] = (1.0, 2.5)
    boundary_share: float = 0.7
    fluent_repetition_rate: float = 0.12
    filled_pause_rate: float = 0.08
    interregnum_rate: float = 0.25
    embedding_dim: int = 16
    population_seed: int = 20240601

    def validate(self) -> None:
        rates = {
            "disfluency_rate": self.disfluency_rate,
            "confuser_rate": self.confuser_rate,
            "boundary_share": self.boundary_share,
            "fluent_repetition_rate": self.fluent_repetition_rate,
            "filled_pause_rate": self.filled_pause_rate,
            "interregnum_rate": self.interregnum_rate,
            **{f"category_mix[{k}]": v for k, v in self.category_mix.items()},
        }
        for name, value in rates.items():
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        if self.n_sentences < 1:
            raise ConfigError("n_sentences must be >= 1")
        total = sum(self.category_mix.values())
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ConfigError(f"category_mix must sum to 1, got {total}")


VOCAB: dict[str, list[str]] = {
    "PRP": ["i", "you", "we", "they", "he", "she"],
    "DT": ["the", "a", "this", "that"],
    "NN": [
        "cat", "dog", "house", "car", "budget", "option", "job", "movie",
        "idea", "problem", "school", "phone", "plan", "game", "team",
        "road", "book", "story",
    ],
    "VBP": ["like", "want", "see", "need", "take", "get", "keep", "make"],
    "VBD": ["saw", "bought", "showed", "took"],
    "JJ": ["big", "small", "good", "nice", "black", "cheap", "new", "old", "red", "fast"],
    "RB": ["very", "really", "quite", "pretty"],
    "IN": ["in", "on", "at", "with", "for"],
    "UH": ["uh", "um", "well"],
}
POS_TAGS = tuple(sorted(VOCAB))

_MENTAL_VERBS = ["think", "know", "guess", "hope"]  # tagged VBP
_PP_VERBS = ["live", "stay", "work", "sit"]  # tagged VBP
_LIST_VERBS = VOCAB["VBD"]


@dataclass
class SynthCorpus:
    utterances: list[Utterance]
    cues: dict[str, np.ndarray]
    lexicon: Lexicon
    embeddings: dict[str, np.ndarray]
    pos_means: dict[str, np.ndarray]
    pos_sds: dict[str, np.ndarray]
    config: SynthConfig
    seed: int

    def split(self, dev_frac: float = 0.15, test_frac: float = 0.15):
        n = len(self.utterances)
        n_test = int(n * test_frac)
        n_dev = int(n * dev_frac)
        train = self.utterances[: n - n_dev - n_test]
        dev = self.utterances[n - n_dev - n_test : n - n_test]
        test = self.utterances[n - n_test :]
        return train, dev, test


def _pick(rng: np.random.Generator, items: list[str]) -> str:
    return items[int(rng.integers(len(items)))]


def _word(rng, pos: str) -> tuple[str, str]:
    return _pick(rng, VOCAB[pos]), pos


_NP_ADJ_PROB = 0.35  # shared by fluent lists and rephrases: keeps them token-alike


def _np_phrase(rng, adj_prob: float = 0.0) -> list[tuple[str, str]]:
    if rng.random() < adj_prob:
        return [_word(rng, "DT"), _word(rng, "JJ"), _word(rng, "NN")]
    return [_word(rng, "DT"), _word(rng, "NN")]


def _clause(rng, cfg: SynthConfig, kind: str | None = None) -> list[tuple[str, str]]:
    kind = kind or _pick(rng, ["simple", "simple", "adj", "adj", "pp", "complement", "list2"])
    if kind == "simple":
        return [_word(rng, "PRP"), _word(rng, "VBP")] + _np_phrase(rng)
    if kind == "adj":
        head = [_word(rng, "PRP"), _word(rng, "VBP"), _word(rng, "DT")]
        roll = rng.random()
        if roll < cfg.fluent_repetition_rate:
            rb = _word(rng, "RB")
            mods = [rb, rb]  # emphatic doubling, fluent
        elif roll < cfg.fluent_repetition_rate + 0.25:
            mods = [_word(rng, "RB")]
        else:
            mods = []
        return head + mods + [_word(rng, "JJ"), _word(rng, "NN")]
    if kind == "pp":
        return [_word(rng, "PRP"), (_pick(rng, _PP_VERBS), "VBP"), _word(rng, "IN")] + _np_phrase(rng)
    if kind == "complement":
        return [_word(rng, "PRP"), (_pick(rng, _MENTAL_VERBS), "VBP"),
                _word(rng, "PRP"), _word(rng, "VBP")] + _np_phrase(rng)
    if kind == "list2":
        return [_word(rng, "PRP"), (_pick(rng, _LIST_VERBS), "VBD")] \
            + _np_phrase(rng, _NP_ADJ_PROB) + _np_phrase(rng, _NP_ADJ_PROB)
    raise ValueError(f"unknown clause kind {kind}")


def _choose_category(rng, mix: dict[str, float]) -> str:
    roll = rng.random()
    acc = 0.0
    for name in ("repetition", "rephrase", "restart", "nested"):
        acc += mix.get(name, 0.0)
        if roll < acc:
            return name
    return "repetition"


def _inject(rng, cfg: SynthConfig, category: str):
    """Build one clause carrying a disfluency; returns (words, spans).

    Only the reparandum-final token carries the prosodic shift, so longer
    reparanda force span starts to come from text: a model with frozen
    prosody features can find interruption points but not span extents.
    """
    if category == "repetition":
        if rng.random() < 0.35:
            # Repeat an intensifier: token-identical to fluent emphasis.
            rb = _word(rng, "RB")
            head = [_word(rng, "PRP"), _word(rng, "VBP"), _word(rng, "DT")]
            words = head + [rb, rb, _word(rng, "JJ"), _word(rng, "NN")]
            p = len(head)
            return words, [DisfluencySpan((p, p + 1), None, (p + 1, p + 2))]
        clause = _clause(rng, cfg, "simple")
        roll = rng.random()
        span_len = 1 if roll < 0.45 else 2 if roll < 0.8 else 3
        seg = clause[:span_len]
        if rng.random() < cfg.interregnum_rate:
            filler = [(_pick(rng, ["uh", "um"]), "UH")]
            words = seg + filler + clause
            return words, [DisfluencySpan((0, span_len), (span_len, span_len + 1),
                                          (span_len + 1, span_len + 1 + span_len))]
        words = seg + clause
        return words, [DisfluencySpan((0, span_len), None, (span_len, 2 * span_len))]

    if category == "rephrase":
        if rng.random() < 0.7:
            # Content rephrase inside a list verb: token-identical to a list.
            head = [_word(rng, "PRP"), (_pick(rng, _LIST_VERBS), "VBD")]
            np_a = _np_phrase(rng, _NP_ADJ_PROB)
            np_b = _np_phrase(rng, _NP_ADJ_PROB)
            words = head + np_a + np_b
            p = len(head)
            q = p + len(np_a)
            return words, [DisfluencySpan((p, q), None, (q, q + len(np_b)))]
        subj_a, subj_b = _word(rng, "PRP"), _word(rng, "PRP")
        rest = [_word(rng, "VBP")] + _np_phrase(rng)
        words = [subj_a, subj_b] + rest
        return words, [DisfluencySpan((0, 1), None, (1, 2))]

    if category == "restart":
        follow = _clause(rng, cfg, "simple")
        if rng.random() < 0.6:
            # Abandoned "PRP think": token-identical to a complement clause.
            prefix = [_word(rng, "PRP"), (_pick(rng, _MENTAL_VERBS), "VBP")]
        else:
            prefix = [_word(rng, "PRP"), _word(rng, "VBP"), _word(rng, "DT")]
        words = prefix + follow
        return words, [DisfluencySpan((0, len(prefix)), None, None)]

    if category == "nested":
        clause = _clause(rng, cfg, "simple")
        w = clause[0]
        words = [w, w] + clause
        repair_len = 2 if rng.random() < 0.6 else 3
        inner = DisfluencySpan((0, 1), None, (1, 2), nesting_depth=1)
        outer = DisfluencySpan((0, 2), None, (2, 2 + repair_len), nesting_depth=0)
        return words, [outer, inner]

    raise ValueError(f"unknown category {category}")


def _letters_to_phones(word: str) -> list[tuple[str, str]]:
    vowel_map = {"a": "AA", "e": "EH", "i": "IY", "o": "OW", "u": "UW"}
    phones: list[tuple[str, str]] = []
    seen_vowel = False
    for ch in word.lower():
        if ch in vowel_map:
            stress = "none" if seen_vowel else "primary"
            seen_vowel = True
            phones.append((vowel_map[ch], stress))
        elif ch.isalpha():
            phones.append((ch.upper(), "none"))
    return phones or [("UNK", "none")]


def _build_lexicon() -> Lexicon:
    entries: dict[str, list[tuple[str, str]]] = {}
    for words in VOCAB.values():
        for w in words:
            entries[w] = _letters_to_phones(w)
    for w in _MENTAL_VERBS + _PP_VERBS:
        entries[w] = _letters_to_phones(w)
    return Lexicon(entries)


def _population(rng) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """Per-POS cue Gaussians: one global base per cue plus a small per-POS
    offset. The offsets keep duration/energy word-class dependent without
    turning raw cue vectors into a clean POS fingerprint."""
    base = np.empty(N_CUES)
    base[PAUSE] = rng.uniform(0.12, 0.30)
    base[DURATION] = rng.uniform(0.15, 0.40)
    base[2:5] = rng.uniform(-2.0, 2.0, 3)
    base[5:8] = rng.uniform(4.0, 9.0, 3)
    base[8:21] = rng.uniform(-5.0, 5.0, 13)
    offsets = np.concatenate(([0.03, 0.05], np.full(3, 0.2), np.full(3, 0.3), np.full(13, 0.5)))
    means, sds = {}, {}
    for pos in POS_TAGS:
        m = base + rng.uniform(-offsets, offsets)
        s = np.empty(N_CUES)
        # Wide per-POS sigma ranges: a delta*sigma shift on a low-sigma word
        # class is tiny in raw space but still delta in z space.
        s[PAUSE] = rng.uniform(0.02, 0.10)
        s[DURATION] = rng.uniform(0.02, 0.12)
        s[2:5] = rng.uniform(0.1, 0.8, 3)
        s[5:8] = rng.uniform(0.2, 1.2, 3)
        s[8:21] = rng.uniform(0.3, 2.0, 13)
        m[PAUSE] = max(m[PAUSE], 0.05)
        means[pos], sds[pos] = m, s
    return means, sds


def _sample_cues(rng, utt: Utterance, means, sds, cfg: SynthConfig) -> np.ndarray:
    cues = np.empty((len(utt.tokens), N_CUES))
    pre_ip = utt.pre_interruption_indices()
    lo, hi = cfg.confuser_magnitude
    for i, tok in enumerate(utt.tokens):
        m, s = means[tok.pos], sds[tok.pos]
        row = rng.normal(m, s)
        if i in pre_ip:
            row[DURATION] += cfg.delta * s[DURATION]
            row[PAUSE] += cfg.delta * s[PAUSE]
            for k in ENERGY_CUES:
                row[k] -= cfg.delta * s[k]
        elif rng.random() < cfg.confuser_rate:
            mag = rng.uniform(lo, hi)
            row[DURATION] += mag * s[DURATION]
            if rng.random() < cfg.boundary_share:
                row[PAUSE] += mag * s[PAUSE]
                for k in ENERGY_CUES:
                    row[k] -= mag * s[k]
            else:
                for k in ENERGY_CUES:
                    row[k] += mag * s[k]
        row[PAUSE] = min(max(row[PAUSE], 0.0), 0.999999)
        row[DURATION] = max(row[DURATION], 0.01)
        cues[i] = np.round(row, 6)
    return cues


def _assign_times(utt: Utterance, cues: np.ndarray) -> None:
    t = 0.0
    for i, tok in enumerate(utt.tokens):
        gap = math.expm1(cues[i, PAUSE])  # inverse of the pause scaling
        start = round(t + gap, 6)
        end = round(start + cues[i, DURATION], 6)
        tok.start, tok.end = start, end
        t = end


def synth_generate(seed: int, config: SynthConfig | None = None) -> SynthCorpus:
    cfg = config or SynthConfig()
    cfg.validate()
    rng = np.random.default_rng(seed)
    pop_rng = np.random.default_rng(cfg.population_seed)
    means, sds = _population(pop_rng)
    lexicon = _build_lexicon()
    embeddings = {
        w: np.round(pop_rng.normal(0.0, 0.5, cfg.embedding_dim), 6)
        for w in _all_words()
    }

    utterances: list[Utterance] = []
    cues: dict[str, np.ndarray] = {}
    for n in range(cfg.n_sentences):
        disfluent = rng.random() < cfg.disfluency_rate
        lead: list[tuple[str, str]] = []
        if rng.random() < 0.10:
            lead = [("well", "UH")]
        if disfluent:
            category = _choose_category(rng, cfg.category_mix)
            body, spans = _inject(rng, cfg, category)
            if rng.random() < 0.4:
                body = body + _clause(rng, cfg)
        else:
            body = _clause(rng, cfg)
            if rng.random() < 0.3:
                body = body + _clause(rng, cfg)
            if rng.random() < cfg.filled_pause_rate:
                gap = int(rng.integers(1, len(body) + 1))
                body = body[:gap] + [(_pick(rng, ["uh", "um"]), "UH")] + body[gap:]
            spans = []
        offset = len(lead)
        words = lead + body
        spans = [replace(s,
                         reparandum=(s.reparandum[0] + offset, s.reparandum[1] + offset),
                         interregnum=None if s.interregnum is None else
                         (s.interregnum[0] + offset, s.interregnum[1] + offset),
                         repair=None if s.repair is None else
                         (s.repair[0] + offset, s.repair[1] + offset))
                 for s in spans]
        tokens = [make_token(w, pos) for w, pos in words]
        utt = Utterance(id=f"synth-{n:05d}", tokens=tokens, spans=spans)
        lexicon.apply(utt.tokens)
        utt_cues = _sample_cues(rng, utt, means, sds, cfg)
        _assign_times(utt, utt_cues)
        utterances.append(utt)
        cues[utt.id] = utt_cues

    return SynthCorpus(
        utterances=utterances,
        cues=cues,
        lexicon=lexicon,
        embeddings=embeddings,
        pos_means=means,
        pos_sds=sds,
        config=cfg,
        seed=seed,
    )


def _all_words() -> list[str]:
    words = set(_MENTAL_VERBS) | set(_PP_VERBS)
    for vs in VOCAB.values():
        words.update(vs)
    return sorted(words)
