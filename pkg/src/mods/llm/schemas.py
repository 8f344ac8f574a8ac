"""Structured payloads exchanged with the model.

Every shape has a parser (raw text -> typed value) and a renderer (typed
value -> canonical text); ``parse_structured(render(v, s), s) == v``.

========================  ==========================================  =====================================
shape                     wire form                                   parsed value
========================  ==========================================  =====================================
``topic-list``            ``{"topics": [str, ...]}``                  ``list[str]``
``speaker-selection``     ``{"speakers": [{"query": str, "id": int}]}`` ``list[(int, str)]``
``speaker-ids``           ``{"speakers": [int, ...]}``                ``list[int]``
``tailored-queries``      ``{"queries": {"<id>": str}}``              ``list[(int, str)]`` sorted by id
``perspective-list``      ``{"yes": [str], "no": [str]}``             ``list[(stance, fact)]``, yes first
``doc-perspectives``      ``{"documents": {"<id>": {"yes", "no"}}}``  ``dict[int, list[(stance, fact)]]``
``summary``               markdown, one ``## title`` per paragraph    ``list[(title, body)]``
``paragraph``             plain paragraph (a leading header is dropped) ``str``
``entailment``            ``{"entailed": bool}``                      ``bool``
``text``                  anything non-empty                          ``str``
========================  ==========================================  =====================================
"""

from __future__ import annotations

import json
import re
from collections.abc import Callable, Collection
from typing import Any

from .backend import ChatRequest, ModelBackend, complete
from .ledger import UsageLedger


class StructuredOutputError(ValueError):
    def __init__(self, message: str, span: str = ""):
        self.span = span[:300]
        super().__init__(f"{message}: {self.span!r}" if span else message)


_FENCE = re.compile(r"^```[a-zA-Z]*\s*\n(.*?)\n?```\s*$", re.S)
_HEADER = re.compile(r"^\s{0,3}#{1,6}\s+(.+?)\s*#*\s*$")
_BOLD_HEADER = re.compile(r"^\s*\*\*(.+?)\*\*\s*$")


def _strip_fence(text: str) -> str:
    text = text.strip()
    m = _FENCE.match(text)
    return m.group(1).strip() if m else text


def _load_json(text: str) -> Any:
    body = _strip_fence(text)
    start = min((i for i in (body.find("{"), body.find("[")) if i >= 0), default=-1)
    if start < 0:
        raise StructuredOutputError("no JSON payload found", text)
    try:
        value, _ = json.JSONDecoder().raw_decode(body, start)
    except json.JSONDecodeError as exc:
        raise StructuredOutputError(f"invalid JSON ({exc.msg})", body[start:]) from None
    return value


def _field(obj: Any, name: str, kind: type, text: str) -> Any:
    if not isinstance(obj, dict) or name not in obj:
        raise StructuredOutputError(f"missing field {name!r}", text)
    value = obj[name]
    if not isinstance(value, kind):
        raise StructuredOutputError(f"field {name!r} must be {kind.__name__}", text)
    return value


def _strings(values: list, what: str, text: str) -> list[str]:
    out = []
    for v in values:
        if not isinstance(v, str) or not v.strip():
            raise StructuredOutputError(f"{what} must be non-empty strings", text)
        out.append(v.strip())
    return out


def _doc_id(value: Any, text: str) -> int:
    if isinstance(value, bool):
        raise StructuredOutputError("document id must be an integer", text)
    if isinstance(value, str) and value.strip().isdigit():
        return int(value)
    if isinstance(value, int):
        return value
    raise StructuredOutputError("document id must be an integer", text)


def _check_ids(ids: list[int], valid_ids: Collection[int] | None, text: str) -> None:
    if len(set(ids)) != len(ids):
        raise StructuredOutputError("duplicate document id", text)
    if valid_ids is not None:
        unknown = sorted(set(ids) - set(valid_ids))
        if unknown:
            raise StructuredOutputError(f"unknown document id {unknown[0]}", text)


def _stance_lists(obj: Any, text: str) -> list[tuple[str, str]]:
    if not isinstance(obj, dict):
        raise StructuredOutputError("perspectives must be an object with 'yes' and 'no' lists", text)
    out = []
    for stance in ("yes", "no"):
        values = obj.get(stance, [])
        if not isinstance(values, list):
            raise StructuredOutputError(f"field {stance!r} must be a list", text)
        out.extend((stance, f) for f in _strings(values, "facts", text))
    return out


def parse_summary_markdown(text: str) -> list[tuple[str, str]]:
    """Split ``## title`` sections; body lines are joined with spaces."""
    sections: list[tuple[str, list[str]]] = []
    for line in _strip_fence(text).splitlines():
        m = _HEADER.match(line) or _BOLD_HEADER.match(line)
        if m:
            sections.append((m.group(1).strip(), []))
        elif line.strip():
            if not sections:
                raise StructuredOutputError("text before the first topic header", line)
            sections[-1][1].append(line.strip())
    return [(title, " ".join(lines)) for title, lines in sections]


def parse_structured(text: str, shape: str, *, count: int | None = None,
                     valid_ids: Collection[int] | None = None) -> Any:
    """Parse model output for ``shape``.

    ``count`` enforces the number of topics (``topic-list``) or paragraphs
    (``summary``); ``valid_ids`` restricts the document ids a payload may use.
    """
    if shape == "topic-list":
        topics = _strings(_field(_load_json(text), "topics", list, text), "topics", text)
        if count is not None and len(topics) != count:
            raise StructuredOutputError(f"topic count mismatch: expected {count}, got {len(topics)}", text)
        if len({t.lower() for t in topics}) != len(topics):
            raise StructuredOutputError("duplicate topics", text)
        return topics
    if shape == "speaker-selection":
        items = _field(_load_json(text), "speakers", list, text)
        out = []
        for item in items:
            if not isinstance(item, dict):
                raise StructuredOutputError("each speaker must be an object", text)
            query = _field(item, "query", str, text).strip()
            if not query:
                raise StructuredOutputError("tailored query is empty", text)
            out.append((_doc_id(_field(item, "id", object, text), text), query))
        _check_ids([i for i, _ in out], valid_ids, text)
        return out
    if shape == "speaker-ids":
        ids = [_doc_id(v, text) for v in _field(_load_json(text), "speakers", list, text)]
        _check_ids(ids, valid_ids, text)
        return ids
    if shape == "tailored-queries":
        raw = _field(_load_json(text), "queries", dict, text)
        out = []
        for k, v in raw.items():
            if not isinstance(v, str) or not v.strip():
                raise StructuredOutputError("tailored query is empty", text)
            out.append((_doc_id(k, text), v.strip()))
        _check_ids([i for i, _ in out], None, text)
        if valid_ids is not None:
            missing = sorted(set(valid_ids) - {i for i, _ in out})
            if missing:
                raise StructuredOutputError(f"no tailored query for document {missing[0]}", text)
            out = [(i, q) for i, q in out if i in set(valid_ids)]
        return sorted(out)
    if shape == "perspective-list":
        return _stance_lists(_load_json(text), text)
    if shape == "doc-perspectives":
        raw = _field(_load_json(text), "documents", dict, text)
        out = {_doc_id(k, text): _stance_lists(v, text) for k, v in raw.items()}
        _check_ids(list(out), valid_ids, text)
        return dict(sorted(out.items()))
    if shape == "summary":
        sections = parse_summary_markdown(text)
        if not sections:
            raise StructuredOutputError("missing topic headers", text)
        if count is not None and len(sections) != count:
            raise StructuredOutputError(f"paragraph count mismatch: expected {count}, got {len(sections)}", text)
        for title, body in sections:
            if not body:
                raise StructuredOutputError(f"empty paragraph under {title!r}", text)
        return sections
    if shape == "paragraph":
        lines = [ln for ln in _strip_fence(text).splitlines() if ln.strip()]
        if lines and (_HEADER.match(lines[0]) or _BOLD_HEADER.match(lines[0])):
            lines = lines[1:]
        body = " ".join(ln.strip() for ln in lines)
        if not body:
            raise StructuredOutputError("empty paragraph", text)
        return body
    if shape == "entailment":
        stripped = _strip_fence(text).strip().lower()
        if stripped.startswith("{"):
            value = _field(_load_json(text), "entailed", bool, text)
            return value
        word = re.sub(r"[^a-z ]", " ", stripped).split()
        if word[:2] == ["not", "entailed"] or word[:1] in (["no"], ["not_entailed"]):
            return False
        if word[:1] in (["entailed"], ["yes"]):
            return True
        raise StructuredOutputError("unrecognized entailment verdict", text)
    if shape == "text":
        body = _strip_fence(text)
        if not body:
            raise StructuredOutputError("empty response", text)
        return body
    raise ValueError(f"unknown shape {shape!r}")


def render(value: Any, shape: str) -> str:
    """Canonical text for a parsed payload."""
    if shape == "topic-list":
        return json.dumps({"topics": list(value)}, ensure_ascii=False)
    if shape == "speaker-selection":
        return json.dumps({"speakers": [{"query": q, "id": i} for i, q in value]}, ensure_ascii=False)
    if shape == "speaker-ids":
        return json.dumps({"speakers": list(value)})
    if shape == "tailored-queries":
        return json.dumps({"queries": {str(i): q for i, q in value}}, ensure_ascii=False)
    if shape == "perspective-list":
        return json.dumps(_group(value), ensure_ascii=False)
    if shape == "doc-perspectives":
        return json.dumps({"documents": {str(i): _group(p) for i, p in value.items()}}, ensure_ascii=False)
    if shape == "summary":
        return "\n\n".join(f"## {title}\n{body}" for title, body in value) + "\n"
    if shape == "paragraph":
        return value
    if shape == "entailment":
        return json.dumps({"entailed": bool(value)})
    if shape == "text":
        return value
    raise ValueError(f"unknown shape {shape!r}")


def _group(perspectives) -> dict[str, list[str]]:
    return {s: [f for st, f in perspectives if st == s] for s in ("yes", "no")}


SHAPES = ("topic-list", "speaker-selection", "speaker-ids", "tailored-queries", "perspective-list",
          "doc-perspectives", "summary", "paragraph", "entailment", "text")

MAX_RETRIES = 2

_CORRECTION = ("Your previous reply could not be used ({error}). Reply again following the required "
               "output format exactly, with no other text.")


def request_structured(backend: ModelBackend, request: ChatRequest, stage: str,
                       ledger: UsageLedger | None = None, *, count: int | None = None,
                       valid_ids: Collection[int] | None = None,
                       check: Callable[[Any], None] | None = None,
                       max_retries: int = MAX_RETRIES) -> Any:
    """Complete ``request`` and parse its ``shape``, re-prompting on failure.

    ``check`` may raise :class:`StructuredOutputError` for semantic problems
    and is treated like a parse failure. After ``max_retries`` corrective
    re-prompts the last error is raised.
    """
    if request.shape is None:
        raise ValueError("request_structured needs a request with a shape")
    current = request
    for attempt in range(max_retries + 1):
        response = complete(backend, current, stage, ledger)
        try:
            value = parse_structured(response.text, request.shape, count=count, valid_ids=valid_ids)
            if check is not None:
                check(value)
            return value
        except StructuredOutputError as exc:
            if attempt == max_retries:
                raise
            current = current.with_message(_CORRECTION.format(error=exc))
    raise AssertionError("unreachable")
