"""The moderated panel: agenda planning, speaker selection with tailored
queries, per-speaker discussion into an outline, and outline summarization."""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

from ..corpus import DebateEntry
from ..llm import BackendError, ModelBackend, StructuredOutputError, UsageLedger, UsageSummary, usage_report
from ..llm.schemas import request_structured
from ..retrieval import DEFAULT_K, DocIndex, RetrievalError, build_index, retrieve
from .common import (
    build_paragraph,
    build_summary,
    citation_check,
    format_biographies,
    format_draft,
    format_outline,
    format_section,
    make_key,
    make_request,
    summary_warnings,
)
from .types import (
    NO_PERSPECTIVES,
    AgendaError,
    Biography,
    ConfigError,
    Outline,
    OutlineEntry,
    OutlineSection,
    Perspective,
    PipelineConfig,
    RunReport,
    Selection,
    SpeakerError,
    Summary,
    SummaryError,
    Topic,
)

logger = logging.getLogger(__name__)

FREEFORM_NOTE = "free-form draft"
EMPTY_DRAFT = "(nothing yet)"


def build_indexes(entry: DebateEntry) -> dict[int, DocIndex]:
    return {d.id: build_index(d) for d in entry.documents}


def make_biographies(entry: DebateEntry, query: str, k: int = DEFAULT_K,
                     indexes: Mapping[int, DocIndex] | None = None) -> list[Biography]:
    """Top-``k`` paragraphs of every document for ``query``, in document order."""
    indexes = indexes or build_indexes(entry)
    return [Biography(d.id, query, retrieve(indexes[d.id], query, k)) for d in entry.documents]


def plan_agenda(query: str, biographies: Sequence[Biography], m: int, backend: ModelBackend, *,
                ledger: UsageLedger | None = None, max_retries: int = 2) -> list[Topic]:
    if m <= 1:
        raise ConfigError("the number of topics must exceed 1")
    request = make_request("agenda", "topic-list", make_key("agenda", m=m, n=len(biographies)),
                           query=query, biographies=format_biographies(biographies), m=m)
    try:
        titles = request_structured(backend, request, "agenda", ledger, count=m, max_retries=max_retries)
    except StructuredOutputError as exc:
        raise AgendaError(f"agenda planning failed: {exc}") from exc
    return [Topic(i, t) for i, t in enumerate(titles)]


def select_and_tailor(query: str, topic: Topic, topic_biographies: Sequence[Biography],
                      config: PipelineConfig, backend: ModelBackend, *,
                      ledger: UsageLedger | None = None) -> Selection:
    """Pick speakers for ``topic`` and give each a tailored query.

    ``no_mod`` selects every speaker; ``no_cot`` asks for speaker ids alone and
    tailors in a second call; ``no_tailor`` asks for ids alone and uses the
    topic title as every speaker's query.
    """
    bios = {b.doc_id: b for b in topic_biographies}
    labels = dict(m=config.m, n=len(topic_biographies), topic=topic.index)
    fields = dict(query=query, topic=topic.title)

    def ask(template, shape, stage, subset, **kw):
        request = make_request(template, shape, make_key(stage, **labels), **fields,
                               biographies=format_biographies([bios[i] for i in subset]))
        return request_structured(backend, request, stage, ledger, max_retries=config.max_retries, **kw)

    if config.has("no_mod"):
        ids = sorted(bios)
    elif config.has("no_cot") or config.has("no_tailor"):
        ids = sorted(ask("selection_ids", "speaker-ids", "selection", sorted(bios), valid_ids=bios))
    else:
        pairs = ask("selection", "speaker-selection", "selection", sorted(bios), valid_ids=bios)
        return Selection(topic.index, tuple(sorted(pairs)))

    if config.has("no_tailor"):
        return Selection(topic.index, tuple((i, topic.title) for i in ids))
    if not ids:
        return Selection(topic.index, ())
    queries = ask("tailor", "tailored-queries", "tailor", ids, valid_ids=ids)
    return Selection(topic.index, tuple(queries))


def speaker_respond(entry: DebateEntry, doc_id: int, query: str, topic: Topic, tailored_query: str,
                    k: int, backend: ModelBackend, *, ledger: UsageLedger | None = None,
                    index: DocIndex | None = None, m: int | None = None,
                    max_retries: int = 2) -> list[Perspective]:
    """One speaker's yes/no perspectives, grounded in its own top-``k`` passages."""
    doc = entry.document(doc_id)
    try:
        contexts = retrieve(index or build_index(doc), tailored_query, k)
    except RetrievalError as exc:
        raise SpeakerError(f"document {doc_id}: {exc}") from exc
    request = make_request(
        "speaker", "perspective-list",
        make_key("speaker", m=m, n=entry.n_docs, topic=topic.index, doc=doc_id),
        query=query, topic=topic.title, tailored_query=tailored_query, doc_id=doc_id,
        contexts="\n".join(f"- {t}" for t in contexts.texts),
    )
    try:
        pairs = request_structured(backend, request, "speaker", ledger, max_retries=max_retries)
    except (StructuredOutputError, BackendError) as exc:
        raise SpeakerError(f"document {doc_id}: {exc}") from exc
    return [Perspective(s, f) for s, f in pairs]


class _Discussion(NamedTuple):
    sections: list[OutlineSection]
    drafts: list[str]


def _entry(doc_id: int, tailored_query: str, perspectives, unlabeled: bool) -> OutlineEntry:
    if unlabeled:
        perspectives = [Perspective(None, p.fact) for p in perspectives]
    return OutlineEntry(doc_id, tailored_query, tuple(perspectives), None if perspectives else NO_PERSPECTIVES)


def _discuss_topic(entry, topic, selection, config, backend, ledger, report, indexes,
                   pool) -> tuple[OutlineSection, str]:
    q = entry.query
    unlabeled = config.has("no_stance")
    labels = dict(m=config.m, n=entry.n_docs, topic=topic.index)

    if config.has("no_outline"):
        draft = EMPTY_DRAFT
        entries = []
        for doc_id, tq in selection.speakers:
            try:
                contexts = retrieve(indexes[doc_id], tq, config.k)
                request = make_request(
                    "speaker_freeform", "paragraph", make_key("speaker", doc=doc_id, **labels),
                    query=q, topic=topic.title, tailored_query=tq, doc_id=doc_id, draft=draft,
                    contexts="\n".join(f"- {t}" for t in contexts.texts))
                draft = request_structured(backend, request, "speaker", ledger, max_retries=config.max_retries,
                                           check=citation_check(entry.n_docs))
            except (RetrievalError, StructuredOutputError, BackendError) as exc:
                report.omissions.append({"topic": topic.index, "doc_id": doc_id, "reason": f"speaker failed: {exc}"})
                continue
            entries.append(OutlineEntry(doc_id, tq, (), FREEFORM_NOTE))
        return OutlineSection(topic, tuple(entries)), draft

    if config.has("no_speak"):
        if not selection.speakers:
            return OutlineSection(topic, ()), ""
        blocks = []
        for doc_id, tq in selection.speakers:
            try:
                texts = retrieve(indexes[doc_id], tq, config.k).texts
            except RetrievalError:
                texts = retrieve(indexes[doc_id], topic.title, config.k).texts
            blocks.append("\n".join([f"Document [{doc_id}], asked: {tq}"] + [f"- {t}" for t in texts]))
        key = make_key("speaker", docs=",".join(map(str, selection.doc_ids)), **labels)
        request = make_request("speaker_combined", "doc-perspectives", key, query=q, topic=topic.title,
                               contexts="\n\n".join(blocks))
        try:
            by_doc = request_structured(backend, request, "speaker", ledger, max_retries=config.max_retries,
                                        valid_ids=selection.doc_ids)
        except (StructuredOutputError, BackendError) as exc:
            for doc_id in selection.doc_ids:
                report.omissions.append({"topic": topic.index, "doc_id": doc_id, "reason": f"speaker failed: {exc}"})
            return OutlineSection(topic, ()), ""
        entries = [_entry(doc_id, tq, [Perspective(s, f) for s, f in by_doc.get(doc_id, [])], unlabeled)
                   for doc_id, tq in selection.speakers]
        return OutlineSection(topic, tuple(sorted(entries, key=lambda e: e.doc_id))), ""

    def respond(item):
        doc_id, tq = item
        try:
            return speaker_respond(entry, doc_id, q, topic, tq, config.k, backend, ledger=ledger,
                                   index=indexes[doc_id], m=config.m, max_retries=config.max_retries)
        except SpeakerError as exc:
            return exc

    entries = []
    for (doc_id, tq), result in zip(selection.speakers, pool.map(respond, selection.speakers)):
        if isinstance(result, SpeakerError):
            report.omissions.append({"topic": topic.index, "doc_id": doc_id,
                                     "reason": f"speaker failed: {result}"})
            continue
        entries.append(_entry(doc_id, tq, result, unlabeled))
    return OutlineSection(topic, tuple(sorted(entries, key=lambda e: e.doc_id))), ""


def _discussion(entry, config, backend, ledger, report) -> tuple[Outline, list[str]]:
    if config.mode is None:
        raise ConfigError("outline building needs a MoDS mode")
    indexes = build_indexes(entry)
    q = entry.query
    biographies = make_biographies(entry, q, config.k, indexes)
    topics = plan_agenda(q, biographies, config.m, backend, ledger=ledger, max_retries=config.max_retries)
    report.topics = [t.title for t in topics]

    sections, drafts = [], []
    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        for topic in topics:
            topic_bios = make_biographies(entry, topic.title, config.k, indexes)
            try:
                selection = select_and_tailor(q, topic, topic_bios, config, backend, ledger=ledger)
            except (StructuredOutputError, BackendError) as exc:
                report.omissions.append({"topic": topic.index, "doc_id": None, "reason": f"selection failed: {exc}"})
                selection = Selection(topic.index, ())
            report.selections.append({
                "topic": topic.index,
                "speakers": [{"doc_id": i, "tailored_query": tq} for i, tq in selection.speakers],
            })
            if not selection.speakers:
                report.omissions.append({"topic": topic.index, "doc_id": None, "reason": "empty selection"})
            section, draft = _discuss_topic(entry, topic, selection, config, backend, ledger, report, indexes, pool)
            sections.append(section)
            drafts.append(draft)
    for s in sections:
        for e in s.entries:
            if e.note == NO_PERSPECTIVES:
                report.omissions.append({"topic": s.topic.index, "doc_id": e.doc_id, "reason": NO_PERSPECTIVES})
    outline = Outline(q, tuple(sections))
    if config.has("no_outline"):
        report.drafts = list(drafts)
    return outline, drafts


def build_outline(entry: DebateEntry, config: PipelineConfig, backend: ModelBackend, *,
                  ledger: UsageLedger | None = None, report: RunReport | None = None) -> Outline:
    report = report if report is not None else RunReport(config.to_dict())
    return _discussion(entry, config, backend, ledger, report)[0]


def summarize_outline(outline: Outline, mode: str, backend: ModelBackend, *, n_docs: int,
                      ledger: UsageLedger | None = None, report: RunReport | None = None,
                      drafts: Sequence[str] | None = None, max_retries: int = 2) -> Summary:
    """Condense the outline: in one call (``mods_all``) or one call per topic
    section (``mods_topic``). ``drafts`` replaces the outline text with
    free-form topic paragraphs."""
    if not outline.sections:
        raise SummaryError("cannot summarize an empty outline")
    topics = outline.topics
    m = len(topics)
    check = citation_check(n_docs)
    try:
        if mode == "mods_all":
            text = (format_draft(topics, drafts) if drafts is not None else format_outline(outline))
            request = make_request("summarize_all", "summary", make_key("summarize", mode="all", m=m, n=n_docs),
                                   query=outline.query, outline=text, m=m)
            sections = request_structured(backend, request, "summarize", ledger, count=m, check=check,
                                          max_retries=max_retries)
            summary = build_summary(topics, [body for _, body in sections])
        elif mode == "mods_topic":
            paragraphs = []
            for j, section in enumerate(outline.sections):
                text = (format_draft([section.topic], [drafts[j]]) if drafts is not None
                        else format_section(section, number=False))
                request = make_request("summarize_topic", "paragraph",
                                       make_key("summarize", mode="topic", m=m, n=n_docs, topic=section.topic.index),
                                       query=outline.query, topic=section.topic.title, outline=text)
                body = request_structured(backend, request, "summarize", ledger, check=check,
                                          max_retries=max_retries)
                paragraphs.append(build_paragraph(section.topic, body))
            summary = Summary(tuple(paragraphs))
        else:
            raise ConfigError(f"unknown mode {mode!r}")
    except (StructuredOutputError, BackendError) as exc:
        raise SummaryError(f"summarization failed: {exc}") from exc
    if report is not None:
        allowed = None if drafts is not None else outline.doc_ids()
        report.warnings.extend(summary_warnings(summary, allowed))
    return summary


class RunResult(NamedTuple):
    outline: Outline
    summary: Summary
    usage: UsageSummary
    report: RunReport


def run_mods(entry: DebateEntry, config: PipelineConfig, backend: ModelBackend, *,
             ledger: UsageLedger | None = None) -> RunResult:
    """Plan, discuss and summarize; returns the outline, summary, usage and run report."""
    if config.mode is None:
        raise ConfigError("run_mods needs a MoDS mode; use run_baseline for baselines")
    ledger = ledger if ledger is not None else UsageLedger()
    report = RunReport(config.to_dict())
    outline, drafts = _discussion(entry, config, backend, ledger, report)
    summary = summarize_outline(outline, config.mode, backend, n_docs=entry.n_docs, ledger=ledger, report=report,
                                drafts=drafts if config.has("no_outline") else None,
                                max_retries=config.max_retries)
    usage = usage_report(ledger)
    report.usage = usage.to_dict()
    return RunResult(outline, summary, usage, report)
