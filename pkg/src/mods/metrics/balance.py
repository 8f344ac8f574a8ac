"""Document coverage and stance balance of cited documents.

Fairness is ``KL(P || uniform)`` and faithfulness ``KL(P || Q)``, where P is
the yes/no distribution of the cited documents' ground-truth stances and Q the
distribution over all input documents. Natural log, ``0 * ln 0 = 0``.
"""

from __future__ import annotations

import math
from collections.abc import Collection, Sequence

from ..corpus import DebateEntry, input_stance_distribution

UNIFORM = (0.5, 0.5)


class CitationError(ValueError):
    pass


def kl_divergence(p: Sequence[float], q: Sequence[float]) -> float:
    total = 0.0
    for pi, qi in zip(p, q):
        if pi == 0:
            continue
        if qi == 0:
            return math.inf
        total += pi * math.log(pi / qi)
    return max(total, 0.0)


def _check_ids(cited: Collection[int], n_docs: int) -> None:
    bad = sorted(i for i in cited if not 1 <= i <= n_docs)
    if bad:
        raise CitationError(f"citation [{bad[0]}] does not name one of the {n_docs} input documents")


def doc_coverage(cited: Collection[int], n_docs: int) -> float:
    if n_docs < 1:
        raise ValueError("n_docs must be at least 1")
    _check_ids(cited, n_docs)
    return len(set(cited)) / n_docs


def cited_stance_distribution(cited: Collection[int], entry: DebateEntry) -> tuple[float, float]:
    _check_ids(cited, entry.n_docs)
    ids = set(cited)
    if not ids:
        raise CitationError("stance distribution of an empty citation set is undefined")
    n_yes = sum(entry.stance_of(i) == "yes" for i in ids)
    return n_yes / len(ids), (len(ids) - n_yes) / len(ids)


def stance_balance(cited: Collection[int], entry: DebateEntry) -> tuple[float, float]:
    """``(fairness, faithfulness)`` of a non-empty citation set."""
    p = cited_stance_distribution(cited, entry)
    return kl_divergence(p, UNIFORM), kl_divergence(p, input_stance_distribution(entry).as_tuple())
