"""Pronunciation lexicon: word -> phone sequence with 3-way stress."""

from __future__ import annotations

from pathlib import Path

from .types import STRESS_NONE, STRESS_PRIMARY, STRESS_SECONDARY, UNK_PHONE, Token

_STRESS_BY_DIGIT = {"0": STRESS_NONE, "1": STRESS_PRIMARY, "2": STRESS_SECONDARY}

UNK_PRONUNCIATION = [(UNK_PHONE, STRESS_NONE)]


class LexiconError(ValueError):
    pass


class Lexicon:
    """Immutable after load; lookups are case-insensitive."""

    def __init__(self, entries: dict[str, list[tuple[str, str]]]):
        self._entries = entries

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self._entries

    def phones(self, word: str) -> list[tuple[str, str]]:
        return list(self._entries.get(word.lower(), UNK_PRONUNCIATION))

    def entries(self) -> dict[str, list[tuple[str, str]]]:
        return dict(self._entries)

    def apply(self, tokens: list[Token]) -> None:
        """Resolve phones in place; fragments look up their core form."""
        for tok in tokens:
            tok.phones = self.phones(tok.core)

    def phone_inventory(self) -> list[str]:
        inv = {UNK_PHONE}
        for phones in self._entries.values():
            inv.update(p for p, _ in phones)
        return sorted(inv)


def parse_phone(raw: str) -> tuple[str, str]:
    if raw and raw[-1] in _STRESS_BY_DIGIT:
        return raw[:-1], _STRESS_BY_DIGIT[raw[-1]]
    return raw, STRESS_NONE


def load_lexicon(path: str | Path) -> Lexicon:
    entries: dict[str, list[tuple[str, str]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise LexiconError(f"{path}:{lineno}: expected 'word TAB phones...', got {line!r}")
            word, raw_phones = parts[0], parts[1:]
            entries[word.lower()] = [parse_phone(p) for p in raw_phones]
    return Lexicon(entries)


def save_lexicon(entries: dict[str, list[tuple[str, str]]], path: str | Path) -> None:
    digit = {STRESS_NONE: "0", STRESS_PRIMARY: "1", STRESS_SECONDARY: "2"}
    lines = []
    for word in sorted(entries):
        phones = " ".join(
            f"{p}{digit[s]}" if _is_vowel(p) else p for p, s in entries[word]
        )
        lines.append(f"{word}\t{phones}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _is_vowel(phone: str) -> bool:
    return phone[:1] in "AEIOU"
