"""Per-transition verification of a backend and cycle-by-cycle lockstep
comparison of the prompt machine against the direct interpreter."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .backends import CompletionBackend
from .memparse import Memory, apply_assignments, apply_updates, substitute, substitute_nested
from .promptc import PromptProgram, expected_completion, init_memory, is_unconditional
from .tm import Configuration, Outcome, TuringMachine, initial_configuration, tm_step
from .vm import MachineState, decode_state, step

_INTEGER_LABEL = re.compile(r"-?[0-9]+")


@dataclass
class VerificationCase:
    state: str
    symbol: str | None  # None: the instruction ignores the head symbol
    prompt: str
    expected: str
    staged: Memory = field(repr=False)


@dataclass
class CaseResult:
    case: VerificationCase
    mode: str
    passed: bool
    actual: str | None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "state": self.case.state,
            "symbol": self.case.symbol,
            "mode": self.mode,
            "pass": self.passed,
            "expected": self.case.expected,
            "actual": self.actual,
            "error": self.error,
        }


@dataclass
class VerificationReport:
    mode: str
    results: list[CaseResult]

    @property
    def passed(self) -> int:
        return sum(r.passed for r in self.results)

    @property
    def failed(self) -> list[CaseResult]:
        return [r for r in self.results if not r.passed]

    @property
    def ok(self) -> bool:
        return not self.failed

    def to_json(self) -> str:
        payload = {
            "mode": self.mode,
            "passed": self.passed,
            "total": len(self.results),
            "cases": [r.to_dict() for r in self.results],
        }
        return json.dumps(payload, ensure_ascii=False, indent=2) + "\n"


def _staged_case(tm, program, state, symbol) -> VerificationCase:
    memory = init_memory(program, "", 0)
    head = memory["i"]
    memory[str(head)] = symbol if symbol is not None else program.blank
    staged = memory.copy()
    prompt = substitute_nested(program.instructions[state], "@", memory)
    expected = expected_completion(tm, state, symbol if symbol is not None else tm.symbols[0])
    return VerificationCase(state, symbol, prompt, expected, staged)


def enumerate_cases(tm: TuringMachine, program: PromptProgram) -> list[VerificationCase]:
    cases = []
    for state in tm.states:
        if is_unconditional(tm, state):
            cases.append(_staged_case(tm, program, state, None))
        else:
            cases.extend(_staged_case(tm, program, state, s) for s in tm.symbols)
    return cases


def _effect(staged: Memory, completion: str):
    # Post-process on a private copy and report what it did to the machine.
    memory = staged.copy()
    head = memory["i"]
    cell = str(head)
    spliced = substitute(completion, "%", memory)
    apply_updates(apply_assignments(spliced, memory), memory)
    new_head = memory.get("i")
    move = new_head - head if isinstance(new_head, int) else new_head
    return memory.get(cell), move, memory.get("op")


def verify_transitions(
    cases: list[VerificationCase], backend: CompletionBackend, mode: str = "exact"
) -> VerificationReport:
    """Ask ``backend`` for every case and check the answer.

    ``exact`` compares text after dropping one leading line break; ``semantic``
    compares the tape write, head move and next instruction the completion
    induces.  Backend errors count as failures.
    """
    if mode not in ("exact", "semantic"):
        raise ValueError(f"unknown verification mode {mode!r}")
    results = []
    for case in cases:
        try:
            actual = backend.complete(case.prompt)
        except Exception as exc:
            results.append(CaseResult(case, mode, False, None, f"{type(exc).__name__}: {exc}"))
            continue
        if mode == "exact":
            body = actual[1:] if actual.startswith("\n") else actual
            passed = body == case.expected
        else:
            passed = _effect(case.staged, actual) == _effect(case.staged, case.expected)
        results.append(CaseResult(case, mode, passed, actual))
    return VerificationReport(mode, results)


@dataclass
class Equivalent:
    cycles: int
    halted: bool


@dataclass
class DivergenceReport:
    cycle: int
    field: str
    vm_value: object
    oracle_value: object

    def __str__(self) -> str:
        return f"cycle {self.cycle}: {self.field} differs (vm={self.vm_value!r}, oracle={self.oracle_value!r})"


def _cell(memory: Memory, label: str):
    value = memory.get(label, memory.blank)
    return None if value == memory.blank else value


def vm_tape(memory: Memory) -> dict[int, object]:
    """Integer-labelled, non-blank bindings keyed by cell index."""
    tape = {}
    for label, value in memory.items():
        if _INTEGER_LABEL.fullmatch(label) and str(int(label)) == label and value != memory.blank:
            tape[int(label)] = value
    return dict(sorted(tape.items()))


def _compare_full(cycle, memory, program, config, oracle_state):
    decoded = decode_state(memory, program)
    if decoded != oracle_state:
        return DivergenceReport(cycle, "state", decoded, oracle_state)
    if memory.get("i") != config.head:
        return DivergenceReport(cycle, "head", memory.get("i"), config.head)
    vm_cells, oracle_cells = vm_tape(memory), config.tape.normal_form()
    if vm_cells != oracle_cells:
        return DivergenceReport(cycle, "tape", vm_cells, oracle_cells)
    return None


def lockstep_run(
    program: PromptProgram,
    tm: TuringMachine,
    tape0: str,
    head0: int,
    max_cycles: int,
    backend: CompletionBackend,
) -> Equivalent | DivergenceReport:
    """Advance both machines together, comparing state, head and tape after
    every cycle.

    The oracle's halting encounter is paired with the VM cycle that loads
    ``halt``; both then count it as their last cycle.  Tape comparison after
    a cycle only inspects the cells either side touched, which suffices
    because the tapes agreed before it; the full tapes are compared at the
    start and the end.
    """
    config: Configuration = initial_configuration(tm, tape0, head0)
    state = MachineState(init_memory(program, tape0, head0), backend)
    memory = state.memory

    divergence = _compare_full(0, memory, program, config, config.state)
    if divergence:
        return divergence
    cycle = 0
    halted = False
    while cycle < max_cycles and not halted:
        written = config.head
        oracle = tm_step(config, tm)
        halted = oracle is Outcome.HALTED
        event = step(state)
        cycle += 1
        if event is None:
            # The VM was already halted before the oracle was.
            return DivergenceReport(cycle, "state", Outcome.HALTED, config.state)
        oracle_state = Outcome.HALTED if halted else config.state
        decoded = decode_state(memory, program)
        if decoded != oracle_state:
            return DivergenceReport(cycle, "state", decoded, oracle_state)
        if memory.get("i") != config.head:
            return DivergenceReport(cycle, "head", memory.get("i"), config.head)
        touched = {str(written)}
        touched.update(label for label, _, _ in event.bindings_changed)
        touched.update(label for label, _ in event.updates_applied)
        for label in touched:
            if not _INTEGER_LABEL.fullmatch(label) or str(int(label)) != label:
                continue
            vm_value, oracle_value = _cell(memory, label), config.tape.cells.get(int(label))
            if vm_value != oracle_value:
                return DivergenceReport(cycle, "tape", {int(label): vm_value}, {int(label): oracle_value})
    divergence = _compare_full(cycle, memory, program, config, Outcome.HALTED if halted else config.state)
    if divergence:
        return divergence
    return Equivalent(cycle, halted)
