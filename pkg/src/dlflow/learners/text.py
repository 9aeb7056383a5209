"""Bag-of-words text preprocessing: lowercase, split on non-alphabetic
characters, stem, count against a frequency-ranked vocabulary."""

import json
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .porter import porter_stem

_TOKEN_RE = re.compile(r"[a-z]+")


def tokenize(text: str) -> list[str]:
    return [porter_stem(tok) for tok in _TOKEN_RE.findall(text.lower())]


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.tokens)

    def index(self) -> dict[str, int]:
        return {tok: i for i, tok in enumerate(self.tokens)}

    def to_bytes(self) -> bytes:
        return json.dumps(list(self.tokens)).encode("utf-8")

    @staticmethod
    def from_bytes(raw: bytes) -> "Vocabulary":
        return Vocabulary(tuple(json.loads(raw.decode("utf-8"))))

    @staticmethod
    def build(documents: list[str], size: int) -> "Vocabulary":
        """Most frequent stems first; ties broken lexicographically."""
        counts = Counter()
        for doc in documents:
            counts.update(tokenize(doc))
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return Vocabulary(tuple(tok for tok, _ in ranked[:size]))


def vectorize(document: str, vocab: Vocabulary) -> np.ndarray:
    """Count vector over the vocabulary; out-of-vocabulary stems ignored."""
    vec = np.zeros(vocab.size, dtype=np.float64)
    index = vocab.index()
    for tok in tokenize(document):
        pos = index.get(tok)
        if pos is not None:
            vec[pos] += 1.0
    return vec


@dataclass(frozen=True)
class LabelEncoding:
    classes: tuple[str, ...]

    def encode(self, label: str) -> int:
        return self.classes.index(label)

    def decode(self, class_id: int) -> str:
        return self.classes[class_id]

    def to_bytes(self) -> bytes:
        return json.dumps(list(self.classes)).encode("utf-8")

    @staticmethod
    def from_bytes(raw: bytes) -> "LabelEncoding":
        return LabelEncoding(tuple(json.loads(raw.decode("utf-8"))))

    @staticmethod
    def build(labels) -> "LabelEncoding":
        return LabelEncoding(tuple(sorted(set(labels))))
