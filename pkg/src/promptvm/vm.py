"""The fetch/complete/write-back cycle of the stored-instruction machine."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable

from .backends import CompletionBackend
from .memparse import Memory, Value, apply_updates, scan_assignments, substitute, substitute_nested
from .promptc import PromptProgram
from .tm import Outcome

HALT = "halt"
DEFAULT_MAX_CYCLES = 1_000_000


class VMError(RuntimeError):
    pass


@dataclass
class TraceEvent:
    cycle: int
    op_before: str
    prompt: str
    completion: str
    bindings_changed: list[tuple[str, Value | None, Value]]
    updates_applied: list[tuple[str, int]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "cycle": self.cycle,
            "op_before": self.op_before,
            "prompt": self.prompt,
            "completion": self.completion,
            "bindings_changed": [list(change) for change in self.bindings_changed],
            "updates_applied": [list(update) for update in self.updates_applied],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


@dataclass
class MachineState:
    memory: Memory
    backend: CompletionBackend
    cycle_count: int = 0
    trace_sink: Callable[[TraceEvent], None] | None = None


@dataclass
class RunReport:
    outcome: Outcome
    cycles: int
    trace: list[TraceEvent] = field(default_factory=list)
    error: BaseException | None = None


def step(state: MachineState) -> TraceEvent | None:
    """Run one compute cycle; returns None, without calling the backend, when
    ``op`` holds ``halt``.

    Exceptions from the backend or the pre-processor propagate with memory
    left as it was when the failing stage started.
    """
    memory = state.memory
    try:
        op = memory["op"]
    except KeyError:
        raise VMError("instruction register 'op' is unbound") from None
    if not isinstance(op, str):
        raise VMError(f"instruction register holds {type(op).__name__}, not text")
    if op == HALT:
        return None
    prompt = substitute_nested(op, "@", memory)
    completion = state.backend.complete(prompt)
    spliced = substitute(completion, "%", memory)
    assignments, suffix = scan_assignments(spliced)
    changed = []
    for label, value in assignments:
        changed.append((label, memory.get(label), value))
        memory[label] = value
    applied = apply_updates(suffix, memory)
    state.cycle_count += 1
    event = TraceEvent(state.cycle_count, op, prompt, completion, changed, applied)
    if state.trace_sink is not None:
        state.trace_sink(event)
    return event


def run(state: MachineState, max_cycles: int = DEFAULT_MAX_CYCLES, keep_trace: bool = True) -> RunReport:
    """Step until ``halt`` is fetched, a stage fails, or ``max_cycles`` backend
    calls have been made (NOT_HALTED: the limit ran out, nothing more)."""
    if max_cycles < 0:
        raise ValueError("max_cycles must be non-negative")
    report = RunReport(Outcome.NOT_HALTED, 0)
    try:
        while report.cycles < max_cycles:
            event = step(state)
            if event is None:
                report.outcome = Outcome.HALTED
                return report
            report.cycles += 1
            if keep_trace:
                report.trace.append(event)
    except Exception as exc:
        report.outcome, report.error = Outcome.FAILED, exc
        return report
    # Fetching halt costs no cycle, so it is still observable at the limit.
    if state.memory.get("op") == HALT:
        report.outcome = Outcome.HALTED
    return report


def decode_state(memory: Memory, program: PromptProgram) -> str | Outcome | None:
    """Map the instruction register back to a machine state.

    Returns the state label, ``Outcome.HALTED`` for ``halt``, or None when
    ``op`` matches no instruction of ``program``.
    """
    op = memory.get("op")
    if op == HALT:
        return Outcome.HALTED
    return program.state_of(op)
