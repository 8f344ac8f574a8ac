from __future__ import annotations

from dataclasses import dataclass, field

from ..retrieval import DEFAULT_K, RankedContexts

MODES = ("mods_topic", "mods_all")
BASELINES = ("long_context", "rag_all", "rag_doc", "hierarchical", "incremental_all", "incremental_topic")
ABLATIONS = ("no_tailor", "no_cot", "no_speak", "no_mod", "no_stance", "no_outline")
DEFAULT_PARALLELISM = 4

NO_PERSPECTIVES = "no relevant perspectives"


class PipelineError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


class AgendaError(PipelineError):
    pass


class SelectionError(PipelineError):
    pass


class SpeakerError(PipelineError):
    pass


class SummaryError(PipelineError):
    pass


@dataclass(frozen=True)
class Topic:
    index: int
    title: str

    def __post_init__(self):
        if not self.title.strip():
            raise ValueError("topic title is empty")


@dataclass(frozen=True)
class Biography:
    doc_id: int
    query_used: str
    contexts: RankedContexts

    def __post_init__(self):
        if self.contexts.doc_id != self.doc_id:
            raise ValueError("biography contexts come from another document")


@dataclass(frozen=True)
class Selection:
    topic_index: int
    speakers: tuple[tuple[int, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "speakers", tuple(self.speakers))
        ids = [i for i, _ in self.speakers]
        if len(set(ids)) != len(ids):
            raise ValueError("a speaker was selected twice for one topic")

    @property
    def doc_ids(self) -> list[int]:
        return [i for i, _ in self.speakers]


@dataclass(frozen=True)
class Perspective:
    """A factual sentence and the answer it supports; ``stance`` is None when
    stance labels are ablated."""

    stance: str | None
    fact: str

    def __post_init__(self):
        if self.stance not in ("yes", "no", None):
            raise ValueError(f"bad stance {self.stance!r}")
        if not self.fact.strip():
            raise ValueError("empty fact")


@dataclass(frozen=True)
class OutlineEntry:
    doc_id: int
    tailored_query: str
    perspectives: tuple[Perspective, ...] = ()
    note: str | None = None


@dataclass(frozen=True)
class OutlineSection:
    topic: Topic
    entries: tuple[OutlineEntry, ...] = ()


@dataclass(frozen=True)
class Outline:
    query: str
    sections: tuple[OutlineSection, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sections", tuple(self.sections))
        idx = [s.topic.index for s in self.sections]
        if idx != sorted(idx):
            raise ValueError("outline sections must be in topic order")
        for s in self.sections:
            ids = [e.doc_id for e in s.entries]
            if ids != sorted(ids):
                raise ValueError("outline entries must be sorted by document id")

    @property
    def topics(self) -> list[Topic]:
        return [s.topic for s in self.sections]

    def doc_ids(self) -> set[int]:
        return {e.doc_id for s in self.sections for e in s.entries}


@dataclass(frozen=True)
class SummarySentence:
    text: str
    citations: frozenset[int]
    flagged: bool = False


@dataclass(frozen=True)
class SummaryParagraph:
    topic: Topic
    sentences: tuple[SummarySentence, ...]

    @property
    def text(self) -> str:
        return " ".join(s.text for s in self.sentences)

    @property
    def citations(self) -> frozenset[int]:
        return frozenset().union(*(s.citations for s in self.sentences))


@dataclass(frozen=True)
class Summary:
    paragraphs: tuple[SummaryParagraph, ...]

    @property
    def citations(self) -> frozenset[int]:
        return frozenset().union(*(p.citations for p in self.paragraphs))

    @property
    def sentence_count(self) -> int:
        return sum(len(p.sentences) for p in self.paragraphs)


@dataclass(frozen=True)
class PipelineConfig:
    """Run settings. Exactly one of ``mode`` and ``baseline`` is active; when
    neither is given the mode defaults to ``mods_topic``."""

    m: int = 3
    k: int = DEFAULT_K
    mode: str | None = None
    ablations: frozenset[str] = frozenset()
    baseline: str | None = None
    parallelism: int = DEFAULT_PARALLELISM
    max_retries: int = 2

    def __post_init__(self):
        object.__setattr__(self, "ablations", frozenset(self.ablations))
        if self.mode is not None and self.baseline is not None:
            raise ConfigError("mode and baseline are mutually exclusive")
        if self.mode is None and self.baseline is None:
            object.__setattr__(self, "mode", "mods_topic")
        if self.mode is not None and self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.baseline is not None and self.baseline not in BASELINES:
            raise ConfigError(f"unknown baseline {self.baseline!r}")
        unknown = sorted(self.ablations - set(ABLATIONS))
        if unknown:
            raise ConfigError(f"unknown ablation {unknown[0]!r}")
        if self.baseline is not None and self.ablations:
            raise ConfigError("ablations apply to MoDS modes only")
        if self.m <= 1:
            raise ConfigError("the number of topics must exceed 1")
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be at least 1")

    def has(self, flag: str) -> bool:
        return flag in self.ablations

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "k": self.k,
            "mode": self.mode,
            "baseline": self.baseline,
            "ablations": sorted(self.ablations),
            "parallelism": self.parallelism,
            "max_retries": self.max_retries,
        }


@dataclass
class RunReport:
    """Bookkeeping for one run: what was selected, skipped or flagged."""

    config: dict
    topics: list[str] = field(default_factory=list)
    selections: list[dict] = field(default_factory=list)
    omissions: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    drafts: list[str] = field(default_factory=list)
    usage: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "config": self.config,
            "topics": self.topics,
            "selections": self.selections,
            "omissions": self.omissions,
            "warnings": self.warnings,
            "usage": self.usage,
        }
        if self.drafts:
            out["drafts"] = self.drafts
        if self.details:
            out["details"] = self.details
        return out
