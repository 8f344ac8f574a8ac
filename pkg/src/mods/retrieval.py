"""Per-document lexical retrieval.

Paragraphs are scored with an Okapi BM25 ranking function over lowercased
alphanumeric tokens (no stemming). The idf term uses the non-negative form
``ln(1 + (N - df + 0.5) / (df + 0.5))`` so a common term never lowers a
paragraph's score. Query tokens are scored with multiplicity.

Any object with a ``score_all(index, query_tokens)`` method can be passed as
``scorer`` to :func:`retrieve`, which is how a neural retriever would plug in.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Protocol

from .corpus import Document

DEFAULT_K = 3
K1 = 1.2
B = 0.75

_TOKEN = re.compile(r"[^\W_]+")


class RetrievalError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class DocIndex:
    doc_id: int
    paragraphs: tuple[str, ...]
    term_freqs: tuple[dict[str, int], ...]
    lengths: tuple[int, ...]
    doc_freq: dict[str, int]

    @property
    def paragraph_count(self) -> int:
        return len(self.paragraphs)

    @property
    def avg_length(self) -> float:
        return sum(self.lengths) / len(self.lengths)


@dataclass(frozen=True)
class RankedContext:
    paragraph_index: int
    score: float
    text: str


@dataclass(frozen=True)
class RankedContexts:
    doc_id: int
    query: str
    items: tuple[RankedContext, ...]

    @property
    def texts(self) -> list[str]:
        return [c.text for c in self.items]

    @property
    def indices(self) -> list[int]:
        return [c.paragraph_index for c in self.items]


def index_paragraphs(doc_id: int, paragraphs: Sequence[str]) -> DocIndex:
    if not paragraphs:
        raise RetrievalError("cannot index an empty paragraph list")
    tokens = [tokenize(p) for p in paragraphs]
    df: Counter[str] = Counter()
    for toks in tokens:
        df.update(set(toks))
    return DocIndex(
        doc_id=doc_id,
        paragraphs=tuple(paragraphs),
        term_freqs=tuple(dict(Counter(t)) for t in tokens),
        lengths=tuple(len(t) for t in tokens),
        doc_freq=dict(df),
    )


def build_index(doc: Document) -> DocIndex:
    return index_paragraphs(doc.id, doc.paragraphs)


class Scorer(Protocol):
    def score_all(self, index: DocIndex, query_tokens: Sequence[str]) -> list[float]: ...


@dataclass(frozen=True)
class BM25Scorer:
    k1: float = K1
    b: float = B

    def idf(self, index: DocIndex, term: str) -> float:
        n = index.paragraph_count
        df = index.doc_freq.get(term, 0)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def score_all(self, index: DocIndex, query_tokens: Sequence[str]) -> list[float]:
        avg = index.avg_length
        idf = {t: self.idf(index, t) for t in set(query_tokens)}
        scores = []
        for tf, length in zip(index.term_freqs, index.lengths):
            norm = self.k1 * (1.0 - self.b + self.b * length / avg) if avg > 0 else self.k1
            s = 0.0
            for term in query_tokens:
                f = tf.get(term, 0)
                if f:
                    s += idf[term] * f * (self.k1 + 1.0) / (f + norm)
            scores.append(s)
        return scores


DEFAULT_SCORER = BM25Scorer()


def rank(index: DocIndex, query: str, scorer: Scorer | None = None) -> list[tuple[int, float]]:
    """All paragraphs as ``(index, score)``, best first, ties by position."""
    tokens = tokenize(query)
    if not tokens:
        raise RetrievalError(f"unretrievable query: {query!r}")
    scores = (scorer or DEFAULT_SCORER).score_all(index, tokens)
    return sorted(enumerate(scores), key=lambda item: (-item[1], item[0]))


def retrieve(index: DocIndex, query: str, k: int = DEFAULT_K, scorer: Scorer | None = None) -> RankedContexts:
    if k < 1:
        raise RetrievalError(f"k must be at least 1, got {k}")
    top = rank(index, query, scorer)[:k]
    return RankedContexts(
        doc_id=index.doc_id,
        query=query,
        items=tuple(RankedContext(i, s, index.paragraphs[i]) for i, s in top),
    )
