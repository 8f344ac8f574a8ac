from .backend import (
    BackendError,
    ChatRequest,
    ChatResponse,
    ConfigurationError,
    LiveBackend,
    Message,
    ModelBackend,
    ScriptedBackend,
    ScriptMissError,
    backend_from_spec,
    complete,
)
from .ledger import StageUsage, UsageLedger, UsageSummary, usage_report
from .prompts import render_prompt, system_prompt
from .schemas import SHAPES, StructuredOutputError, parse_structured, render, request_structured

__all__ = [
    "BackendError", "ChatRequest", "ChatResponse", "ConfigurationError", "LiveBackend", "Message",
    "ModelBackend", "ScriptedBackend", "ScriptMissError", "backend_from_spec", "complete",
    "StageUsage", "UsageLedger", "UsageSummary", "usage_report", "render_prompt", "system_prompt",
    "SHAPES", "StructuredOutputError", "parse_structured", "render", "request_structured",
]
