"""Tokenization helpers shared by the reward, supervision and answer-judging code."""

from __future__ import annotations

import re
import unicodedata
from collections import Counter
from functools import lru_cache

_ARTICLES = re.compile(r"\b(a|an|the)\b")

STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because been
    before being below between both but by can could did do does doing down during
    each few for from further had has have having he her here hers herself him
    himself his how i if in into is it its itself just me more most my myself no nor
    not now of off on once only or other our ours ourselves out over own same she
    should so some such than that the their theirs them themselves then there these
    they this those through to too under until up very was we were what when where
    which while who whom why will with would you your yours yourself yourselves
    """.split()
)


# ASCII characters in Unicode category P; symbols such as $ + < = > stay
_ASCII_PUNCT = {i: None for i in range(128) if unicodedata.category(chr(i)).startswith("P")}


@lru_cache(maxsize=65536)
def strip_punctuation(text: str) -> str:
    if text.isascii():
        return text.translate(_ASCII_PUNCT)
    return "".join(ch for ch in text if not unicodedata.category(ch).startswith("P"))


def tokenize(text: str) -> list[str]:
    """Lowercase, drop Unicode punctuation, split on whitespace."""
    return strip_punctuation(text.lower()).split()


def content_tokens(text: str) -> list[str]:
    return [t for t in tokenize(text) if t not in STOPWORDS]


def unique(tokens) -> list[str]:
    """Deduplicate preserving first occurrence."""
    return list(dict.fromkeys(tokens))


def normalize_answer(text: str) -> str:
    """Extractive-QA answer normalization: lowercase, no punctuation, no articles."""
    text = strip_punctuation(text.lower())
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def contains_phrase(tokens: list[str], phrase: str) -> bool:
    """True if ``phrase`` occurs in ``tokens`` on token boundaries."""
    needle = tokenize(phrase)
    if not needle:
        return False
    n = len(needle)
    return any(tokens[i : i + n] == needle for i in range(len(tokens) - n + 1))


def token_f1(pred: str, ref: str) -> float:
    """Token-level F1 between two texts over normalized token multisets."""
    p, r = tokenize(pred), tokenize(ref)
    if not p and not r:
        return 1.0
    if not p or not r:
        return 0.0
    overlap = sum((Counter(p) & Counter(r)).values())
    return 2.0 * overlap / (len(p) + len(r))
