from .baselines import BaselineResult, pooled_contexts, run_baseline
from .export import (
    export_outline,
    outline_from_dict,
    outline_to_dict,
    summary_from_dict,
    summary_from_markdown,
    summary_to_dict,
    summary_to_markdown,
)
from .mods import (
    RunResult,
    build_outline,
    make_biographies,
    plan_agenda,
    run_mods,
    select_and_tailor,
    speaker_respond,
    summarize_outline,
)
from .types import (
    ABLATIONS,
    BASELINES,
    MODES,
    AgendaError,
    Biography,
    ConfigError,
    Outline,
    OutlineEntry,
    OutlineSection,
    Perspective,
    PipelineConfig,
    PipelineError,
    RunReport,
    Selection,
    SelectionError,
    SpeakerError,
    Summary,
    SummaryError,
    SummaryParagraph,
    SummarySentence,
    Topic,
)


def run(entry, config: PipelineConfig, backend):
    """Run whichever system ``config`` names. Baselines return no outline."""
    if config.baseline is not None:
        summary, usage, report = run_baseline(entry, config.baseline, config, backend)
        return RunResult(None, summary, usage, report)
    return run_mods(entry, config, backend)
