"""OCR transcript statistics."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .porter import stem

HASH_BUCKETS = 32
_TOKEN_RE = re.compile(r"[^\W_]+")
_SENTENCE_RE = re.compile(r"[.!?\n\r]+")

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3


@lru_cache(maxsize=None)
def _word_list(name: str) -> frozenset[str]:
    text = resources.files("adeffect").joinpath("data", name).read_text(encoding="utf-8")
    return frozenset(
        line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


def stopwords() -> frozenset[str]:
    return _word_list("stopwords.txt")


def positive_words() -> frozenset[str]:
    return _word_list("positive_words.txt")


def negative_words() -> frozenset[str]:
    return _word_list("negative_words.txt")


def fnv1a_64(text: str) -> int:
    """64-bit FNV-1a over the UTF-8 bytes; platform independent."""
    h = FNV64_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * FNV64_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


@dataclass(frozen=True)
class Transcript:
    sampled_frames: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        idx = [f for f, _ in self.sampled_frames]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("transcript frame indices must be strictly increasing")

    @property
    def text(self) -> str:
        return "\n".join(t for _, t in self.sampled_frames)


@dataclass
class TextFeatureBlock:
    text_length: int = 0
    word_count: int = 0
    meaningful_word_count: int = 0
    avg_word_length: float = 0.0
    avg_sentence_length: float = 0.0
    sentiment_polarity: float = 0.0
    common_word_hash: np.ndarray = field(default_factory=lambda: np.zeros(HASH_BUCKETS))
    most_common_word: str = ""


def load_transcript(path: str | Path) -> Transcript:
    with open(path, encoding="utf-8") as fh:
        items = json.load(fh)
    return Transcript(tuple((int(it["frame"]), str(it["text"])) for it in items))


def tokenize(raw_text: str) -> list[str]:
    return _TOKEN_RE.findall(raw_text.lower())


def meaningful_words(tokens: Sequence[str]) -> list[str]:
    """Stems of alphabetic, non-stopword tokens whose stem has at least 3 letters."""
    stop = stopwords()
    out = []
    for tok in tokens:
        if tok in stop or not tok.isalpha():
            continue
        s = stem(tok)
        if len(s) >= 3:
            out.append(s)
    return out


def polarity(tokens: Sequence[str]) -> float:
    pos_words, neg_words = positive_words(), negative_words()
    pos = sum(t in pos_words for t in tokens)
    neg = sum(t in neg_words for t in tokens)
    return (pos - neg) / max(1, pos + neg)


def text_block(transcript: Transcript | str, buckets: int = HASH_BUCKETS) -> TextFeatureBlock:
    text = transcript if isinstance(transcript, str) else transcript.text
    tokens = tokenize(text)
    if not tokens:
        return TextFeatureBlock(text_length=len(text), common_word_hash=np.zeros(buckets))
    sentences = [s for s in _SENTENCE_RE.split(text) if tokenize(s)]
    words = meaningful_words(tokens)
    onehot = np.zeros(buckets)
    top = ""
    if words:
        counts = Counter(words)
        best = max(counts.values())
        top = min(w for w, c in counts.items() if c == best)
        onehot[fnv1a_64(top) % buckets] = 1.0
    return TextFeatureBlock(
        text_length=len(text),
        word_count=len(tokens),
        meaningful_word_count=len(words),
        avg_word_length=(sum(map(len, words)) / len(words)) if words else 0.0,
        avg_sentence_length=len(tokens) / len(sentences),
        sentiment_polarity=polarity(tokens),
        common_word_hash=onehot,
        most_common_word=top,
    )


def split_statement(statement: str) -> tuple[list[str], list[str]]:
    """Action and reason halves of an 'I should ... because ...' statement."""
    tokens = tokenize(statement)
    if "because" in tokens:
        i = tokens.index("because")
        return tokens[:i], tokens[i + 1:]
    return tokens, []
