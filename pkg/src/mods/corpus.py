"""Dataset schema for debatable query-focused summarization.

A dataset file is a single JSON array. Each element holds a yes/no query and
its stance-labeled documents::

    [{"query": "Is law school worth it?",
      "topics": 3,
      "documents": [{"id": 1, "url": "...", "stance": "yes",
                     "paragraphs": ["...", "..."]}]}]

Document ids are 1-based and must match their position, so a citation ``[i]``
always resolves to ``entry.documents[i - 1]``.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

logger = logging.getLogger(__name__)

STANCES = ("yes", "no")
DEFAULT_TOPICS = 3

# Corpus filters applied when the reference datasets were built. Entries that
# fail them still load, flagged with a warning.
MIN_SOURCES = 5
MIN_MINORITY_SHARE = Fraction(1, 4)


class CorpusError(ValueError):
    """Base class for dataset problems."""


class DatasetParseError(CorpusError):
    """The dataset file is not valid JSON or a record has the wrong shape."""


class EntryValidationError(CorpusError):
    """A record parsed but violates a schema rule."""

    def __init__(self, entry: int | None, rule: str):
        self.entry = entry
        self.rule = rule
        where = f"entry {entry}: " if entry is not None else ""
        super().__init__(f"{where}{rule}")


@dataclass(frozen=True)
class Document:
    id: int
    stance: str
    paragraphs: tuple[str, ...]
    source_url: str | None = None

    def __post_init__(self):
        if isinstance(self.id, bool) or not isinstance(self.id, int) or self.id < 1:
            raise EntryValidationError(None, f"document id must be a positive integer, got {self.id!r}")
        if self.stance not in STANCES:
            raise EntryValidationError(None, f"document {self.id}: stance must be 'yes' or 'no', got {self.stance!r}")
        object.__setattr__(self, "paragraphs", tuple(self.paragraphs))
        if not self.paragraphs:
            raise EntryValidationError(None, f"document {self.id}: no paragraphs")
        for j, para in enumerate(self.paragraphs):
            if not isinstance(para, str) or not para.strip():
                raise EntryValidationError(None, f"document {self.id}: paragraph {j} is empty")

    @property
    def text(self) -> str:
        return "\n\n".join(self.paragraphs)


@dataclass(frozen=True)
class StanceDist:
    p_yes: float
    p_no: float

    def as_tuple(self) -> tuple[float, float]:
        return (self.p_yes, self.p_no)


@dataclass(frozen=True)
class DebateEntry:
    query: str
    documents: tuple[Document, ...]
    topics_requested: int = DEFAULT_TOPICS
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))
        if not isinstance(self.query, str) or not self.query.strip():
            raise EntryValidationError(None, "query is empty")
        if not self.documents:
            raise EntryValidationError(None, "no documents")
        if not isinstance(self.topics_requested, int) or self.topics_requested <= 1:
            raise EntryValidationError(None, f"topic count must exceed 1, got {self.topics_requested!r}")
        for pos, doc in enumerate(self.documents, start=1):
            if doc.id != pos:
                raise EntryValidationError(None, f"document ids must be 1..{len(self.documents)} in order; "
                                                 f"position {pos} has id {doc.id}")
        if {d.stance for d in self.documents} != set(STANCES):
            raise EntryValidationError(None, "entry not debatable: both 'yes' and 'no' documents are required")
        if not self.warnings:
            object.__setattr__(self, "warnings", tuple(_filter_warnings(self.documents)))

    @property
    def n_docs(self) -> int:
        return len(self.documents)

    def document(self, doc_id: int) -> Document:
        if not 1 <= doc_id <= len(self.documents):
            raise KeyError(doc_id)
        return self.documents[doc_id - 1]

    def stance_of(self, doc_id: int) -> str:
        return self.document(doc_id).stance


def _filter_warnings(documents: Sequence[Document]) -> list[str]:
    out = []
    if len(documents) < MIN_SOURCES:
        out.append(f"fewer than {MIN_SOURCES} sources")
    n_yes = sum(d.stance == "yes" for d in documents)
    minority = Fraction(min(n_yes, len(documents) - n_yes), len(documents))
    if minority < MIN_MINORITY_SHARE:
        out.append("stance split more skewed than 75/25")
    return out


def input_stance_distribution(entry: DebateEntry) -> StanceDist:
    n_yes = sum(d.stance == "yes" for d in entry.documents)
    n = len(entry.documents)
    return StanceDist(float(Fraction(n_yes, n)), float(Fraction(n - n_yes, n)))


# -- (de)serialization -------------------------------------------------------

def entry_from_dict(record: object, index: int) -> DebateEntry:
    if not isinstance(record, dict):
        raise DatasetParseError(f"record {index}: expected an object, got {type(record).__name__}")
    for key in ("query", "documents"):
        if key not in record:
            raise DatasetParseError(f"record {index}: missing field {key!r}")
    raw_docs = record["documents"]
    if not isinstance(raw_docs, list):
        raise DatasetParseError(f"record {index}: 'documents' must be an array")
    try:
        docs = []
        for j, raw in enumerate(raw_docs):
            if not isinstance(raw, dict):
                raise DatasetParseError(f"record {index}: document {j} is not an object")
            missing = [k for k in ("id", "stance", "paragraphs") if k not in raw]
            if missing:
                raise DatasetParseError(f"record {index}: document {j} missing field {missing[0]!r}")
            if not isinstance(raw["paragraphs"], list):
                raise DatasetParseError(f"record {index}: document {j} 'paragraphs' must be an array")
            docs.append(Document(id=raw["id"], stance=raw["stance"],
                                 paragraphs=tuple(raw["paragraphs"]), source_url=raw.get("url")))
        return DebateEntry(query=record["query"], documents=tuple(docs),
                           topics_requested=record.get("topics", DEFAULT_TOPICS))
    except EntryValidationError as exc:
        raise EntryValidationError(index, exc.rule) from None


def entry_to_dict(entry: DebateEntry) -> dict:
    docs = []
    for d in entry.documents:
        raw: dict = {"id": d.id}
        if d.source_url is not None:
            raw["url"] = d.source_url
        raw["stance"] = d.stance
        raw["paragraphs"] = list(d.paragraphs)
        docs.append(raw)
    return {"query": entry.query, "topics": entry.topics_requested, "documents": docs}


def loads_dataset(text: str) -> list[DebateEntry]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, list):
        raise DatasetParseError("dataset must be a JSON array of entries")
    entries = [entry_from_dict(rec, i) for i, rec in enumerate(data)]
    for i, e in enumerate(entries):
        for w in e.warnings:
            logger.warning("entry %d: %s", i, w)
    return entries


def load_dataset(path: str | Path) -> list[DebateEntry]:
    """Read and validate a dataset file, preserving entry order."""
    return loads_dataset(Path(path).read_text(encoding="utf-8"))


def dumps_dataset(entries: Iterable[DebateEntry]) -> str:
    """Canonical serialization; ``loads_dataset`` inverts it exactly."""
    return json.dumps([entry_to_dict(e) for e in entries], indent=2, ensure_ascii=False) + "\n"


def save_dataset(entries: Iterable[DebateEntry], path: str | Path) -> None:
    Path(path).write_text(dumps_dataset(entries), encoding="utf-8")


@dataclass(frozen=True)
class DatasetStats:
    n_entries: int
    mean_docs: float
    mean_paragraphs_per_doc: float
    mean_majority: float
    mean_minority: float


def dataset_statistics(entries: Sequence[DebateEntry]) -> DatasetStats:
    """Entry count, mean documents per entry, mean paragraphs per document and
    the mean per-entry majority/minority stance shares."""
    if not entries:
        raise CorpusError("empty dataset")
    n = len(entries)
    docs = [d for e in entries for d in e.documents]
    majority = []
    for e in entries:
        dist = input_stance_distribution(e)
        majority.append(max(dist.p_yes, dist.p_no))
    mean_major = sum(majority) / n
    return DatasetStats(
        n_entries=n,
        mean_docs=len(docs) / n,
        mean_paragraphs_per_doc=sum(len(d.paragraphs) for d in docs) / len(docs),
        mean_majority=mean_major,
        mean_minority=1.0 - mean_major,
    )
