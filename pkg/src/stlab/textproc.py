"""Text-side plumbing: language codes, vocabulary, tokenization, normalization,
and bitext cleaning.

Normalization tables (punctuation, apostrophe variants) ship as plain-text data
files under ``stlab/data`` so that tests and tooling can read the exact same
tables the library uses.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

PAD_TOKEN = "<pad>"
BOS_EOS_TOKEN = "</s>"
UNK_TOKEN = "<unk>"

# Languages whose orthography uses apostrophes heavily enough that variant
# codepoints must be folded to U+0027 before anything else touches the text.
APOSTROPHE_LANGS = frozenset({"fon"})


def _load_codepoint_file(name: str) -> frozenset[str]:
    text = resources.files("stlab.data").joinpath(name).read_text(encoding="utf-8")
    chars = set()
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        chars.add(chr(int(line, 16)))
    return frozenset(chars)


PUNCTUATION_TABLE = _load_codepoint_file("punctuation.txt")
APOSTROPHE_VARIANTS = _load_codepoint_file("apostrophes.txt")

_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class LanguageCode:
    """A short language tag such as ``aeb`` or ``que``."""

    tag: str

    def __post_init__(self):
        if not self.tag or _WS_RE.search(self.tag):
            raise ValueError(f"bad language tag: {self.tag!r}")

    @property
    def token(self) -> str:
        """The vocabulary token that carries this language, e.g. ``<aeb>``."""
        return f"<{self.tag}>"


class Vocabulary:
    """Ordered token table with reserved specials and registered language codes.

    Ids 0..2 are always ``<pad>``, ``</s>`` and ``<unk>``; language-code tokens
    and regular tokens follow in insertion order. Token/id mapping is a
    bijection: adding a duplicate token raises.
    """

    def __init__(self, tokens: Sequence[str] = (), langs: Iterable[LanguageCode] = (),
                 unit: str = "word"):
        if unit not in ("word", "char"):
            raise ValueError(f"unknown tokenization unit: {unit!r}")
        self.unit = unit
        self._tokens: list[str] = []
        self._ids: dict[str, int] = {}
        self._langs: dict[str, LanguageCode] = {}
        for tok in (PAD_TOKEN, BOS_EOS_TOKEN, UNK_TOKEN):
            self._push(tok)
        for lang in langs:
            self.add_language(lang)
        for tok in tokens:
            self.add_token(tok)

    def _push(self, tok: str) -> int:
        if tok in self._ids:
            raise ValueError(f"duplicate token: {tok!r}")
        self._ids[tok] = len(self._tokens)
        self._tokens.append(tok)
        return self._ids[tok]

    def add_token(self, tok: str) -> int:
        return self._push(tok)

    def add_language(self, lang: LanguageCode) -> int:
        lid = self._push(lang.token)
        self._langs[lang.tag] = lang
        return lid

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def bos_eos_id(self) -> int:
        return 1

    @property
    def unk_id(self) -> int:
        return 2

    @property
    def languages(self) -> tuple[LanguageCode, ...]:
        return tuple(self._langs.values())

    def lang_id(self, lang: LanguageCode | str) -> int:
        tag = lang.tag if isinstance(lang, LanguageCode) else lang
        if tag not in self._langs:
            raise KeyError(f"language not registered: {tag!r}")
        return self._ids[f"<{tag}>"]

    def token_to_id(self, tok: str) -> int:
        return self._ids.get(tok, self.unk_id)

    def id_to_token(self, idx: int) -> str:
        return self._tokens[idx]

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, tok: str) -> bool:
        return tok in self._ids

    def to_dict(self) -> dict:
        return {"unit": self.unit, "tokens": list(self._tokens),
                "langs": sorted(self._langs)}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        vocab = cls.__new__(cls)
        vocab.unit = d["unit"]
        vocab._tokens = list(d["tokens"])
        vocab._ids = {t: i for i, t in enumerate(vocab._tokens)}
        if len(vocab._ids) != len(vocab._tokens):
            raise ValueError("vocabulary tokens are not unique")
        vocab._langs = {tag: LanguageCode(tag) for tag in d["langs"]}
        return vocab

    @classmethod
    def build(cls, texts: Iterable[str], langs: Iterable[LanguageCode] = (),
              unit: str = "word", max_size: int | None = None) -> "Vocabulary":
        """Count symbols in ``texts`` and keep the most frequent ones.

        Ties break alphabetically so builds are reproducible.
        """
        counts: Counter[str] = Counter()
        for text in texts:
            counts.update(_split_units(text, unit))
        ranked = sorted(counts, key=lambda t: (-counts[t], t))
        if max_size is not None:
            ranked = ranked[: max(0, max_size)]
        return cls(tokens=ranked, langs=langs, unit=unit)


def _split_units(text: str, unit: str) -> list[str]:
    if unit == "char":
        return list(text)
    return text.split()


def tokenize(text: str, vocab: Vocabulary) -> list[int]:
    """Map a string to token ids; out-of-vocabulary symbols become ``<unk>``."""
    return [vocab.token_to_id(t) for t in _split_units(text, vocab.unit)]


def detokenize(ids: Sequence[int], vocab: Vocabulary) -> str:
    sep = " " if vocab.unit == "word" else ""
    return sep.join(vocab.id_to_token(i) for i in ids)


def normalize_apostrophes(text: str, lang: LanguageCode | str,
                          flagged: frozenset[str] = APOSTROPHE_LANGS) -> str:
    """Fold apostrophe variant codepoints to U+0027 for flagged languages.

    Text in non-flagged languages passes through unchanged.
    """
    tag = lang.tag if isinstance(lang, LanguageCode) else lang
    if tag not in flagged:
        return text
    return "".join("'" if c in APOSTROPHE_VARIANTS else c for c in text)


def eval_normalize(text: str) -> str:
    """Scoring-time normalization: lowercase, strip punctuation, collapse spaces.

    Idempotent by construction; the punctuation class is the frozen table in
    ``stlab/data/punctuation.txt``.
    """
    text = text.lower()
    text = "".join(c for c in text if c not in PUNCTUATION_TABLE)
    return _WS_RE.sub(" ", text).strip()


@dataclass
class CleaningRules:
    """Bitext filtering knobs. Lengths are whitespace-token counts."""

    max_len_ratio: float = 3.0
    min_len: int = 1
    max_len: int = 250
    drop_empty: bool = True
    drop_copies: bool = True
    dedupe: bool = True

    def __post_init__(self):
        if self.max_len_ratio < 1.0:
            raise ValueError("max_len_ratio must be >= 1")
        if self.min_len < 1:
            raise ValueError("min_len must be >= 1")
        if self.max_len < self.min_len:
            raise ValueError("max_len must be >= min_len")


RULE_ORDER = ("empty", "min_len", "max_len", "len_ratio", "copy", "duplicate")


@dataclass
class CleaningReport:
    total: int = 0
    kept: int = 0
    dropped: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"total": self.total, "kept": self.kept, "dropped": dict(self.dropped)}


def _first_violation(src: str, tgt: str, rules: CleaningRules,
                     seen: set[tuple[str, str]]) -> str | None:
    ls, lt = len(src.split()), len(tgt.split())
    if rules.drop_empty and (ls == 0 or lt == 0):
        return "empty"
    if min(ls, lt) < rules.min_len:
        return "min_len"
    if max(ls, lt) > rules.max_len:
        return "max_len"
    if ls and lt:
        if max(ls / lt, lt / ls) > rules.max_len_ratio:
            return "len_ratio"
    elif ls != lt:
        # One side empty with drop_empty off: treat as an unbounded ratio.
        return "len_ratio"
    if rules.drop_copies and src == tgt:
        return "copy"
    if rules.dedupe and (src, tgt) in seen:
        return "duplicate"
    return None


def clean_bitext_indices(pairs_text: Sequence[tuple[str, str]],
                         rules: CleaningRules) -> tuple[list[int], CleaningReport]:
    """Run the rules over (source, target) text pairs; return surviving indices.

    Rules apply in the fixed order of ``RULE_ORDER`` and each dropped pair is
    charged to the first rule it violates.
    """
    report = CleaningReport(total=len(pairs_text),
                            dropped={name: 0 for name in RULE_ORDER})
    seen: set[tuple[str, str]] = set()
    kept: list[int] = []
    for i, (src, tgt) in enumerate(pairs_text):
        src_s, tgt_s = src.strip(), tgt.strip()
        rule = _first_violation(src_s, tgt_s, rules, seen)
        if rule is None:
            kept.append(i)
            seen.add((src_s, tgt_s))
        else:
            report.dropped[rule] += 1
    report.kept = len(kept)
    return kept, report


def clean_bitext(pairs, rules: CleaningRules):
    """Filter parallel samples (anything with source_text/target_text fields).

    Returns (survivors, CleaningReport). Survivors keep their input order.
    """
    texts = [(p.source_text, p.target_text) for p in pairs]
    kept, report = clean_bitext_indices(texts, rules)
    return [pairs[i] for i in kept], report
