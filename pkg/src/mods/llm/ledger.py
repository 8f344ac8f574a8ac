from __future__ import annotations

import threading
from dataclasses import dataclass, field


@dataclass
class StageUsage:
    input_tokens: int = 0
    output_tokens: int = 0
    calls: int = 0


@dataclass(frozen=True)
class UsageSummary:
    input_tokens: int
    output_tokens: int
    call_count: int
    per_stage: dict[str, StageUsage]
    cost: float = 0.0

    def to_dict(self) -> dict:
        return {
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "call_count": self.call_count,
            "cost": self.cost,
            "per_stage": {
                name: {"input_tokens": s.input_tokens, "output_tokens": s.output_tokens, "calls": s.calls}
                for name, s in sorted(self.per_stage.items())
            },
        }


@dataclass
class UsageLedger:
    """Thread-safe token and call counter keyed by pipeline stage."""

    per_stage: dict[str, StageUsage] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record(self, stage: str, input_tokens: int, output_tokens: int) -> None:
        if input_tokens < 0 or output_tokens < 0:
            raise ValueError("token counts must be nonnegative")
        with self._lock:
            usage = self.per_stage.setdefault(stage, StageUsage())
            usage.input_tokens += input_tokens
            usage.output_tokens += output_tokens
            usage.calls += 1

    @property
    def total_input_tokens(self) -> int:
        with self._lock:
            return sum(s.input_tokens for s in self.per_stage.values())

    @property
    def total_output_tokens(self) -> int:
        with self._lock:
            return sum(s.output_tokens for s in self.per_stage.values())

    @property
    def call_count(self) -> int:
        with self._lock:
            return sum(s.calls for s in self.per_stage.values())

    def calls(self, stage: str) -> int:
        with self._lock:
            s = self.per_stage.get(stage)
            return s.calls if s else 0


def usage_report(ledger: UsageLedger, rate_in: float = 0.0, rate_out: float = 0.0) -> UsageSummary:
    """Totals, a per-stage copy, and ``input * rate_in + output * rate_out``."""
    with ledger._lock:
        stages = {k: StageUsage(v.input_tokens, v.output_tokens, v.calls) for k, v in ledger.per_stage.items()}
    tin = sum(s.input_tokens for s in stages.values())
    tout = sum(s.output_tokens for s in stages.values())
    return UsageSummary(
        input_tokens=tin,
        output_tokens=tout,
        call_count=sum(s.calls for s in stages.values()),
        per_stage=stages,
        cost=tin * rate_in + tout * rate_out,
    )
