"""JSON and markdown renderings of outlines and summaries."""

from __future__ import annotations

import json

from ..llm.schemas import parse_summary_markdown
from .common import build_summary
from .types import Outline, OutlineEntry, OutlineSection, Perspective, Summary, SummaryParagraph, SummarySentence, Topic

UNLABELED = "unlabeled"


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False, sort_keys=True) + "\n"


def outline_to_dict(outline: Outline) -> dict:
    return {
        "query": outline.query,
        "sections": [
            {
                "topic": {"index": s.topic.index, "title": s.topic.title},
                "entries": [
                    {
                        "doc_id": e.doc_id,
                        "tailored_query": e.tailored_query,
                        "perspectives": [{"stance": p.stance or UNLABELED, "fact": p.fact} for p in e.perspectives],
                        "note": e.note,
                    }
                    for e in s.entries
                ],
            }
            for s in outline.sections
        ],
    }


def outline_from_dict(data: dict) -> Outline:
    sections = []
    for s in data["sections"]:
        entries = tuple(
            OutlineEntry(
                doc_id=e["doc_id"],
                tailored_query=e["tailored_query"],
                perspectives=tuple(Perspective(None if p["stance"] == UNLABELED else p["stance"], p["fact"])
                                   for p in e["perspectives"]),
                note=e.get("note"),
            )
            for e in s["entries"]
        )
        sections.append(OutlineSection(Topic(s["topic"]["index"], s["topic"]["title"]), entries))
    return Outline(data["query"], tuple(sections))


def _outline_markdown(outline: Outline) -> str:
    lines = [f"# {outline.query}"]
    for s in outline.sections:
        lines += ["", f"## Topic {s.topic.index + 1}: {s.topic.title}"]
        groups = {"yes": [], "no": [], UNLABELED: []}
        for e in s.entries:
            for p in e.perspectives:
                groups[p.stance or UNLABELED].append(f"- {p.fact} [{e.doc_id}]")
        for stance, title in (("yes", "Yes"), ("no", "No"), (UNLABELED, "Unlabeled")):
            if stance == UNLABELED and not groups[stance]:
                continue
            lines += ["", f"### {title}"]
            lines += groups[stance] or ["- (none)"]
        if s.entries:
            lines += ["", "### Follow-up questions"]
            lines += [f"- [{e.doc_id}] {e.tailored_query}" for e in s.entries]
    return "\n".join(lines) + "\n"


def export_outline(outline: Outline, format: str = "json") -> str:
    """``json`` is the canonical form; ``markdown`` groups facts by topic then
    stance, suffixes each with its document number and lists the tailored
    queries as follow-up questions."""
    if format == "json":
        return dumps(outline_to_dict(outline))
    if format == "markdown":
        return _outline_markdown(outline)
    raise ValueError(f"unknown outline format {format!r}")


def summary_to_dict(summary: Summary) -> dict:
    return {
        "paragraphs": [
            {
                "topic": {"index": p.topic.index, "title": p.topic.title},
                "sentences": [
                    {"text": s.text, "citations": sorted(s.citations), "flagged": s.flagged} for s in p.sentences
                ],
            }
            for p in summary.paragraphs
        ]
    }


def summary_from_dict(data: dict) -> Summary:
    paragraphs = []
    for p in data["paragraphs"]:
        sentences = tuple(SummarySentence(s["text"], frozenset(s["citations"]), bool(s.get("flagged", False)))
                          for s in p["sentences"])
        paragraphs.append(SummaryParagraph(Topic(p["topic"]["index"], p["topic"]["title"]), sentences))
    return Summary(tuple(paragraphs))


def summary_to_markdown(summary: Summary) -> str:
    return "\n\n".join(f"## {p.topic.title}\n\n{p.text}" for p in summary.paragraphs) + "\n"


def summary_from_markdown(text: str) -> Summary:
    sections = parse_summary_markdown(text)
    return build_summary([Topic(i, t) for i, (t, _) in enumerate(sections)], [b for _, b in sections])
