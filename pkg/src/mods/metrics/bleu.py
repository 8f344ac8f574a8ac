"""Self-BLEU between the paragraphs of one summary."""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Sequence

from ..retrieval import tokenize
from .citations import strip_citations

EPSILON = 1e-9


class UndefinedMetricError(ValueError):
    pass


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def sentence_bleu(hypothesis: Sequence[str], references: Sequence[Sequence[str]],
                  n: int = 4, epsilon: float = EPSILON) -> float:
    """BLEU-n with uniform weights, clipped counts and the closest-length
    brevity penalty. A zero match count at some order is replaced by
    ``epsilon`` (``epsilon=0`` disables smoothing)."""
    if not hypothesis or not references:
        return 0.0
    log_p = 0.0
    for order in range(1, n + 1):
        hyp = _ngrams(hypothesis, order)
        total = sum(hyp.values())
        max_ref: Counter = Counter()
        for ref in references:
            max_ref |= _ngrams(ref, order)
        matched = sum(min(c, max_ref[g]) for g, c in hyp.items())
        if matched == 0:
            if epsilon <= 0:
                return 0.0
            log_p += math.log(epsilon / max(total, 1))
        else:
            log_p += math.log(matched / total)
    c = len(hypothesis)
    r = min((len(ref) for ref in references), key=lambda length: (abs(length - c), length))
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_p / n)


def self_bleu(paragraphs: Sequence[str], n: int = 4, epsilon: float = EPSILON) -> float:
    """Mean BLEU of each paragraph against all the others.

    Citation brackets are removed and text is tokenized like the retriever.
    """
    if len(paragraphs) < 2:
        raise UndefinedMetricError("Self-BLEU needs at least two paragraphs")
    tokens = [tokenize(strip_citations(p)) for p in paragraphs]
    scores = [sentence_bleu(tok, tokens[:i] + tokens[i + 1:], n, epsilon) for i, tok in enumerate(tokens)]
    return sum(scores) / len(scores)
