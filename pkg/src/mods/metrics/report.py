from __future__ import annotations

import csv
import io
import json
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from typing import TYPE_CHECKING

from ..corpus import DebateEntry
from ..llm import BackendError, ChatRequest, ModelBackend, StructuredOutputError, UsageLedger, request_structured
from ..llm.prompts import render_prompt
from .balance import CitationError, doc_coverage, stance_balance
from .bleu import self_bleu
from .citations import strip_citations

if TYPE_CHECKING:
    from ..pipeline.types import Outline, Summary


def _mean(values: Sequence[float]) -> float | None:
    return sum(values) / len(values) if values else None


@dataclass(frozen=True)
class CitationReport:
    summary_dc: float
    summary_fairness: float | None
    summary_faithfulness: float | None
    paragraph_dc: float
    paragraph_fairness: float | None
    paragraph_faithfulness: float | None
    total_sentences: int
    avg_sentences_per_paragraph: float
    uncited_paragraphs: int = 0
    citation_accuracy: float | None = None
    self_bleu: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_summary(summary: Summary, entry: DebateEntry, *, with_self_bleu: bool = False) -> CitationReport:
    """Coverage and balance over the whole summary and per topic paragraph.

    Paragraph-level values are unweighted means over paragraphs. A paragraph
    without citations has coverage 0 and is left out of the fairness and
    faithfulness means (counted in ``uncited_paragraphs``); balance values are
    None when nothing is cited.
    """
    n = entry.n_docs
    paragraphs = summary.paragraphs
    if not paragraphs:
        raise ValueError("summary has no paragraphs")
    all_cited = frozenset().union(*(p.citations for p in paragraphs))
    summary_dc = doc_coverage(all_cited, n)
    fair, faith = stance_balance(all_cited, entry) if all_cited else (None, None)

    dcs, fairs, faiths = [], [], []
    for p in paragraphs:
        cited = p.citations
        dcs.append(doc_coverage(cited, n))
        if cited:
            f, g = stance_balance(cited, entry)
            fairs.append(f)
            faiths.append(g)
    total = sum(len(p.sentences) for p in paragraphs)
    sb = None
    if with_self_bleu and len(paragraphs) >= 2:
        sb = self_bleu([p.text for p in paragraphs])
    return CitationReport(
        summary_dc=summary_dc,
        summary_fairness=fair,
        summary_faithfulness=faith,
        paragraph_dc=sum(dcs) / len(dcs),
        paragraph_fairness=_mean(fairs),
        paragraph_faithfulness=_mean(faiths),
        total_sentences=total,
        avg_sentences_per_paragraph=total / len(paragraphs),
        uncited_paragraphs=len(paragraphs) - len(fairs),
        self_bleu=sb,
    )


@dataclass(frozen=True)
class CitationAccuracy:
    value: float | None
    entailed: int
    judged: int
    excluded: int


def citation_accuracy(summary: Summary, entry: DebateEntry, backend: ModelBackend, *,
                      ledger: UsageLedger | None = None, parallelism: int = 4,
                      max_retries: int = 2) -> CitationAccuracy:
    """Fraction of (sentence, cited document) pairs the judge finds entailed.

    Each pair is one call with the cited document as premise. Pairs whose call
    fails are excluded and counted.
    """
    pairs = []
    for pi, p in enumerate(summary.paragraphs):
        for si, s in enumerate(p.sentences):
            for doc_id in sorted(s.citations):
                if not 1 <= doc_id <= entry.n_docs:
                    raise CitationError(f"citation [{doc_id}] names no input document")
                pairs.append((pi, si, doc_id, s.text))

    def judge(pair):
        pi, si, doc_id, text = pair
        prompt = render_prompt("entailment", doc_id=doc_id, document=entry.document(doc_id).text,
                               sentence=strip_citations(text))
        request = ChatRequest.from_prompt(prompt, shape="entailment",
                                          key=f"stage=entailment;p={pi};s={si};doc={doc_id}")
        try:
            return request_structured(backend, request, "entailment", ledger, max_retries=max_retries)
        except (StructuredOutputError, BackendError):
            return None

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        verdicts = list(pool.map(judge, pairs))
    judged = [v for v in verdicts if v is not None]
    entailed = sum(judged)
    return CitationAccuracy(
        value=entailed / len(judged) if judged else None,
        entailed=entailed,
        judged=len(judged),
        excluded=len(verdicts) - len(judged),
    )


@dataclass(frozen=True)
class OutlineStats:
    doc_coverage: float
    topic_doc_coverage: tuple[float, ...]
    perspectives: int
    perspectives_per_doc: float


def outline_stats(outline: Outline, n_docs: int) -> OutlineStats:
    """Coverage counts a document once it contributes a perspective; the
    per-document rate divides by the contributing documents."""
    contributing: set[int] = set()
    per_topic = []
    total = 0
    for s in outline.sections:
        ids = {e.doc_id for e in s.entries if e.perspectives}
        contributing |= ids
        per_topic.append(len(ids) / n_docs)
        total += sum(len(e.perspectives) for e in s.entries)
    return OutlineStats(
        doc_coverage=len(contributing) / n_docs,
        topic_doc_coverage=tuple(per_topic),
        perspectives=total,
        perspectives_per_doc=total / len(contributing) if contributing else 0.0,
    )


# -- emitters ------------------------------------------------------------------

CSV_COLUMNS = [
    ("summary_dc", "DC"),
    ("summary_fairness", "Fair"),
    ("summary_faithfulness", "Faithful"),
    ("paragraph_dc", "Para DC"),
    ("paragraph_fairness", "Para Fair"),
    ("paragraph_faithfulness", "Para Faithful"),
    ("citation_accuracy", "Cite Acc."),
    ("total_sentences", "All Sents"),
    ("avg_sentences_per_paragraph", "Avg Sents"),
    ("self_bleu", "Self-BLEU"),
]


def mean_report(reports: Sequence[CitationReport]) -> dict[str, float | None]:
    """Unweighted mean of each field over the reports that define it."""
    out = {}
    for f in fields(CitationReport):
        values = [getattr(r, f.name) for r in reports if getattr(r, f.name) is not None]
        out[f.name] = _mean(values)
    return out


def reports_to_json(rows: Sequence[tuple[str, CitationReport]]) -> str:
    payload = {
        "entries": [{"entry": name, **r.to_dict()} for name, r in rows],
        "mean": mean_report([r for _, r in rows]),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _cell(value) -> str:
    if value is None:
        return ""
    return repr(float(value)) if isinstance(value, float) else str(value)


def reports_to_csv(rows: Sequence[tuple[str, CitationReport]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["entry"] + [label for _, label in CSV_COLUMNS])
    for name, r in rows:
        writer.writerow([name] + [_cell(getattr(r, key)) for key, _ in CSV_COLUMNS])
    mean = mean_report([r for _, r in rows])
    writer.writerow(["mean"] + [_cell(mean[key]) for key, _ in CSV_COLUMNS])
    return buf.getvalue()


def with_accuracy(report: CitationReport, accuracy: CitationAccuracy) -> CitationReport:
    return replace(report, citation_accuracy=accuracy.value)
