"""Bracket citations and rule-based sentence splitting."""

from __future__ import annotations

import re
from collections.abc import Iterable

CitationSet = frozenset

_BRACKET = re.compile(r"\[([^\[\]]*)\]")
_INTEGER = re.compile(r"\d+")
_CITE_RUN = re.compile(r"(?:\s*\[\s*\d+(?:\s*[,;]?\s*\d+)*\s*\])+")
_TERMINAL = re.compile(r"[.!?]+[\"'”’)]*")
_LAST_WORD = re.compile(r"(\S+)$")

ABBREVIATIONS = frozenset("""
    mr mrs ms dr prof sr jr st mt vs etc e.g i.e cf al approx dept est inc ltd co corp
    fig figs no nos vol vols pp ed eds jan feb mar apr jun jul aug sep sept oct nov dec
    u.s u.k u.n e.u gen gov rep sen rev lt col capt sgt
""".split())


def extract_citations(text: str) -> frozenset[int]:
    """All integers inside ``[...]`` spans, e.g. ``[1][3]`` or ``[2, 4]``."""
    ids = set()
    for span in _BRACKET.findall(text):
        ids.update(int(n) for n in _INTEGER.findall(span))
    ids.discard(0)
    return frozenset(ids)


def format_citations(ids: Iterable[int]) -> str:
    return "".join(f"[{i}]" for i in sorted(set(ids)))


def render_sentence(body: str, ids: Iterable[int]) -> str:
    """``body [i][j].``; the inverse of :func:`extract_citations` for citation-free bodies."""
    cites = format_citations(ids)
    body = body.rstrip()
    return f"{body} {cites}." if cites else f"{body}."


def strip_citations(text: str) -> str:
    text = _BRACKET.sub(lambda m: "" if _INTEGER.search(m.group(1)) else m.group(0), text)
    text = re.sub(r"\s+([.,;:!?])", r"\1", text)
    return re.sub(r"\s{2,}", " ", text).strip()


def _is_abbreviation(prefix: str, punct: str) -> bool:
    if not punct.startswith(".") or len(punct.rstrip("\"'”’)")) > 1:
        return False
    m = _LAST_WORD.search(prefix)
    if not m:
        return False
    word = m.group(1).lstrip("\"'(“‘").lower()
    if len(word) == 1 and word.isalpha():
        return True
    return word in ABBREVIATIONS


def split_sentences(paragraph: str) -> list[tuple[str, frozenset[int]]]:
    """Split on terminal punctuation followed by whitespace.

    Citation brackets right after the punctuation (``"... done. [2] Next"``)
    stay with the preceding sentence. A period after a known abbreviation or a
    single-letter initial does not end a sentence.
    """
    text = paragraph.strip()
    sentences = []
    start = 0
    for m in _TERMINAL.finditer(text):
        if m.start() < start:
            continue
        end = m.end()
        cites = _CITE_RUN.match(text, end)
        if cites:
            end = cites.end()
        if end < len(text) and not text[end].isspace():
            continue
        if _is_abbreviation(text[start:m.start()], m.group()):
            continue
        chunk = text[start:end].strip()
        if chunk:
            sentences.append(chunk)
        start = end
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return [(s, extract_citations(s)) for s in sentences]
