"""Engine-wide tokenization and light text normalization.

Every component (rule parsing, TF-IDF, BLEU, overlap measures) shares this
tokenizer so that token-level artifacts line up: lowercase, split on
whitespace and punctuation, contractions kept as single tokens.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

_QUOTES = str.maketrans({"’": "'", "‘": "'", "“": '"', "”": '"'})
_TOKEN_RE = re.compile(r"[A-Za-z0-9]+(?:'[A-Za-z0-9]+)?")


def straighten(text: str) -> str:
    """Replace curly quotes/apostrophes with ASCII ones (length-preserving)."""
    return text.translate(_QUOTES)


def tokenize(text: str) -> list[str]:
    """Lowercased tokens; "you're" stays one token, punctuation is dropped."""
    return [m.group(0).lower() for m in _TOKEN_RE.finditer(straighten(text))]


def tokenize_with_spans(text: str) -> list[tuple[str, int, int]]:
    """Tokens with (start, end) character offsets into the original text."""
    return [
        (m.group(0).lower(), m.start(), m.end())
        for m in _TOKEN_RE.finditer(straighten(text))
    ]


def normalize_question(text: str) -> str:
    """Canonical form for follow-up equality: casefolded, whitespace-collapsed."""
    return " ".join(straighten(text).casefold().split())


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    data = resources.files("rulechat.data").joinpath("stopwords.txt").read_text()
    return frozenset(
        line.strip() for line in data.splitlines() if line.strip() and not line.startswith("#")
    )


def content_words(text: str, stopwords: frozenset[str] | set[str] | None = None) -> set[str]:
    """Token set with stopwords removed."""
    if stopwords is None:
        stopwords = default_stopwords()
    return {t for t in tokenize(text) if t not in stopwords}


def jaccard(a: set[str], b: set[str]) -> float:
    if not a or not b:
        return 0.0
    return len(a & b) / len(a | b)


def containment(needle: set[str], haystack: set[str]) -> float:
    """Fraction of ``needle`` found in ``haystack``; 0 when needle is empty."""
    if not needle:
        return 0.0
    return len(needle & haystack) / len(needle)


_SENTENCE_RE = re.compile(r"[^.!?]+[.!?]*", re.S)


def split_sentences(text: str) -> list[tuple[str, int, int]]:
    """Naive sentence segmentation; returns (sentence, start, end) spans."""
    out = []
    for m in _SENTENCE_RE.finditer(text):
        raw = m.group(0)
        stripped = raw.strip()
        if not stripped:
            continue
        lead = len(raw) - len(raw.lstrip())
        start = m.start() + lead
        out.append((stripped, start, start + len(stripped)))
    return out
