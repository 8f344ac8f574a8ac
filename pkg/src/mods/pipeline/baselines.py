"""Single-model and multi-call summarization baselines."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

from ..corpus import DebateEntry
from ..llm import BackendError, ModelBackend, StructuredOutputError, UsageLedger, UsageSummary, usage_report
from ..llm.schemas import request_structured
from ..retrieval import RetrievalError, index_paragraphs, rank, retrieve
from .common import (
    build_paragraph,
    build_summary,
    citation_check,
    format_document,
    format_draft,
    make_key,
    make_request,
    summary_warnings,
)
from .mods import build_indexes, make_biographies, plan_agenda
from .types import BASELINES, ConfigError, PipelineConfig, PipelineError, RunReport, Summary, SummaryError, Topic

PLACEHOLDER = "(nothing yet)"


class BaselineResult(NamedTuple):
    summary: Summary
    usage: UsageSummary
    report: RunReport


def pooled_contexts(entry: DebateEntry, query: str, k: int) -> list[tuple[int, str]]:
    """Top ``k * |D|`` paragraphs across all documents as ``(doc_id, text)``."""
    owners, paragraphs = [], []
    for d in entry.documents:
        owners.extend([d.id] * len(d.paragraphs))
        paragraphs.extend(d.paragraphs)
    ranked = rank(index_paragraphs(0, paragraphs), query)[: k * entry.n_docs]
    return [(owners[i], paragraphs[i]) for i, _ in ranked]


def per_document_contexts(entry: DebateEntry, query: str, k: int) -> list[tuple[int, list[str]]]:
    indexes = build_indexes(entry)
    return [(d.id, retrieve(indexes[d.id], query, k).texts) for d in entry.documents]


def _summary_from_sections(sections) -> Summary:
    topics = [Topic(i, title) for i, (title, _) in enumerate(sections)]
    return build_summary(topics, [body for _, body in sections])


def run_baseline(entry: DebateEntry, kind: str | None, config: PipelineConfig, backend: ModelBackend, *,
                 ledger: UsageLedger | None = None) -> BaselineResult:
    kind = kind or config.baseline
    if kind not in BASELINES:
        raise ConfigError(f"unknown baseline {kind!r}")
    ledger = ledger if ledger is not None else UsageLedger()
    report = RunReport(config.to_dict())
    m, n, q = config.m, entry.n_docs, entry.query
    check = citation_check(n)

    def ask(template, shape, stage, *, count=None, labels=None, **fields):
        request = make_request(template, shape, make_key(stage, baseline=kind, m=m, n=n, **(labels or {})),
                               query=q, **fields)
        return request_structured(backend, request, stage, ledger, count=count, check=check,
                                  max_retries=config.max_retries)

    try:
        if kind in ("long_context", "rag_all", "rag_doc"):
            if kind == "long_context":
                contexts = "\n\n".join(f"Document [{d.id}]:\n{format_document(d)}" for d in entry.documents)
            elif kind == "rag_all":
                pooled = pooled_contexts(entry, q, config.k)
                report.details["contexts"] = len(pooled)
                contexts = "\n\n".join(f"Document [{i}]: {t}" for i, t in pooled)
            else:
                per_doc = per_document_contexts(entry, q, config.k)
                report.details["contexts"] = sum(len(t) for _, t in per_doc)
                contexts = "\n\n".join("\n".join([f"Document [{i}]:"] + [f"- {t}" for t in texts])
                                       for i, texts in per_doc)
            sections = ask("baseline_summarize", "summary", "summarize", count=m, contexts=contexts, m=m)
            summary = _summary_from_sections(sections)

        elif kind == "hierarchical":
            def summarize_doc(doc):
                return ask("hierarchical_doc", "text", "doc_summary", labels={"doc": doc.id}, doc_id=doc.id,
                           document=format_document(doc))

            with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
                partials = list(pool.map(summarize_doc, entry.documents))
            summaries = "\n\n".join(f"Document [{d.id}]: {s}" for d, s in zip(entry.documents, partials))
            sections = ask("hierarchical_merge", "summary", "merge", count=m, summaries=summaries, m=m)
            summary = _summary_from_sections(sections)

        else:
            indexes = build_indexes(entry)
            topics = plan_agenda(q, make_biographies(entry, q, config.k, indexes), m, backend,
                                 ledger=ledger, max_retries=config.max_retries)
            report.topics = [t.title for t in topics]
            bodies = [PLACEHOLDER] * m
            for doc in entry.documents:
                sections = ask("incremental_update", "summary", "update", count=m, labels={"doc": doc.id},
                               doc_id=doc.id, draft=format_draft(topics, bodies),
                               document=format_document(doc), m=m)
                bodies = [body for _, body in sections]
            report.drafts = [format_draft(topics, bodies)]
            if kind == "incremental_all":
                sections = ask("incremental_refine_all", "summary", "refine", count=m,
                               draft=format_draft(topics, bodies), m=m)
                summary = build_summary(topics, [body for _, body in sections])
            else:
                paragraphs = []
                for t, body in zip(topics, bodies):
                    refined = ask("incremental_refine_topic", "paragraph", "refine", labels={"topic": t.index},
                                  topic=t.title, draft=body)
                    paragraphs.append(build_paragraph(t, refined))
                summary = Summary(tuple(paragraphs))
    except RetrievalError as exc:
        raise PipelineError(str(exc)) from exc
    except (StructuredOutputError, BackendError) as exc:
        raise SummaryError(f"{kind} failed: {exc}") from exc

    report.topics = [p.topic.title for p in summary.paragraphs]
    report.warnings.extend(summary_warnings(summary, None))
    usage = usage_report(ledger)
    report.usage = usage.to_dict()
    return BaselineResult(summary, usage, report)
