from .balance import CitationError, cited_stance_distribution, doc_coverage, kl_divergence, stance_balance
from .bleu import UndefinedMetricError, self_bleu, sentence_bleu
from .citations import CitationSet, extract_citations, render_sentence, split_sentences, strip_citations
from .report import (
    CitationAccuracy,
    CitationReport,
    OutlineStats,
    citation_accuracy,
    evaluate_summary,
    mean_report,
    outline_stats,
    reports_to_csv,
    reports_to_json,
    with_accuracy,
)
