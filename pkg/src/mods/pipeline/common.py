from __future__ import annotations

from collections.abc import Iterable, Sequence

from ..corpus import Document
from ..llm import ChatRequest, StructuredOutputError, render_prompt, system_prompt
from ..metrics.citations import extract_citations, split_sentences
from .types import (
    NO_PERSPECTIVES,
    Biography,
    Outline,
    OutlineSection,
    Summary,
    SummaryParagraph,
    SummarySentence,
    Topic,
)


def make_key(stage: str, **labels) -> str:
    parts = [f"stage={stage}"] + [f"{k}={v}" for k, v in labels.items() if v is not None]
    return ";".join(parts)


def make_request(template: str, shape: str, key: str, **fields) -> ChatRequest:
    return ChatRequest.from_prompt(render_prompt(template, **fields), system=system_prompt(),
                                   shape=shape, key=key)


def format_biographies(biographies: Sequence[Biography]) -> str:
    blocks = []
    for bio in biographies:
        lines = [f"Document [{bio.doc_id}]:"] + [f"- {t}" for t in bio.contexts.texts]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def format_document(doc: Document) -> str:
    return "\n\n".join(doc.paragraphs)


def format_section(section: OutlineSection, *, number: bool = True) -> str:
    head = f"## Topic {section.topic.index + 1}: {section.topic.title}" if number else f"## {section.topic.title}"
    lines = [head]
    for e in section.entries:
        lines.append(f"- Document [{e.doc_id}], asked: {e.tailored_query}")
        if not e.perspectives:
            lines.append(f"  - ({e.note or NO_PERSPECTIVES})")
        for p in e.perspectives:
            lines.append(f"  - {p.stance}: {p.fact}" if p.stance else f"  - {p.fact}")
    if not section.entries:
        lines.append("- (no speakers)")
    return "\n".join(lines)


def format_outline(outline: Outline) -> str:
    return "\n\n".join(format_section(s) for s in outline.sections)


def format_draft(topics: Sequence[Topic], bodies: Sequence[str]) -> str:
    return "\n\n".join(f"## {t.title}\n{b}" for t, b in zip(topics, bodies))


def citation_check(n_docs: int):
    """Check for ``request_structured``: every bracket citation names an input document."""

    def check(value) -> None:
        texts = [value] if isinstance(value, str) else [body for _, body in value]
        for text in texts:
            bad = sorted(i for i in extract_citations(text) if i > n_docs)
            if bad:
                raise StructuredOutputError(f"citation [{bad[0]}] names no input document (1..{n_docs})", text)

    return check


def build_paragraph(topic: Topic, body: str) -> SummaryParagraph:
    sentences = tuple(SummarySentence(text, cites, flagged=not cites) for text, cites in split_sentences(body))
    return SummaryParagraph(topic, sentences)


def build_summary(topics: Sequence[Topic], bodies: Sequence[str]) -> Summary:
    if len(topics) != len(bodies):
        raise ValueError("one paragraph per topic is required")
    return Summary(tuple(build_paragraph(t, b) for t, b in zip(topics, bodies)))


def summary_warnings(summary: Summary, allowed: Iterable[int] | None) -> list[str]:
    out = []
    allowed = set(allowed) if allowed is not None else None
    for p in summary.paragraphs:
        for j, s in enumerate(p.sentences):
            if s.flagged:
                out.append(f"topic {p.topic.index}: sentence {j} has no citation")
            if allowed is not None:
                for i in sorted(s.citations - allowed):
                    out.append(f"topic {p.topic.index}: sentence {j} cites [{i}], which is not in the outline")
    return out
