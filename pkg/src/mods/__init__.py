"""Moderated multi-speaker summarization for debatable queries.

A moderator plans topics, picks document speakers per topic and tailors their
queries; speakers answer from their own retrieved passages; the resulting
outline is condensed into one cited paragraph per topic.
"""

from .corpus import DebateEntry, Document, input_stance_distribution, load_dataset
from .llm import LiveBackend, ModelBackend, ScriptedBackend, UsageLedger
from .metrics import citation_accuracy, evaluate_summary, self_bleu
from .pipeline import PipelineConfig, run, run_baseline, run_mods

__version__ = "0.1.0"
