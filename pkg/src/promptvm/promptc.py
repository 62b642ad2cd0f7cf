"""Compile a two-symbol Turing machine into a prompt program.

Each state becomes one instruction text.  The instruction reads the symbol
under the head with ``@[@[i]]`` and asks the backend to evaluate a single
if-then; the chosen result string writes the tape through ``%[i]``, moves the
head with ``i+=1`` / ``i-=1`` and loads the next instruction into ``op``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Mapping

from .memparse import Memory
from .tm import TuringMachine

RESERVED_LABELS = frozenset({"op", "i", "boot"})
HALT_VALUE = ' op="halt" '
_LABEL_RE = re.compile(r"[A-Za-z0-9_\-]+")
_INTEGER_RE = re.compile(r"-?[0-9]+")


class CompileError(ValueError):
    pass


class UnsupportedAlphabet(CompileError):
    pass


class LabelClash(CompileError):
    pass


class ProgramFormatError(ValueError):
    pass


@dataclass(frozen=True)
class PromptProgram:
    boot: str
    instructions: Mapping[str, str]
    blank: str
    start: str

    def __post_init__(self) -> None:
        if self.start not in self.instructions:
            raise ProgramFormatError(f"start state {self.start!r} has no instruction")

    @cached_property
    def _by_text(self) -> dict[str, str]:
        table: dict[str, str] = {}
        for label, text in self.instructions.items():
            table.setdefault(text, label)
        return table

    def state_of(self, text: object) -> str | None:
        """The state whose instruction text is exactly ``text``."""
        if not isinstance(text, str):
            return None
        return self._by_text.get(text)

    def to_json(self) -> str:
        payload = {
            "blank": self.blank,
            "start": self.start,
            "boot": self.boot,
            "instructions": dict(self.instructions),
        }
        return json.dumps(payload, ensure_ascii=False, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> PromptProgram:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProgramFormatError(f"program file is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ProgramFormatError("program file must hold a JSON object")
        for key in ("blank", "start", "boot"):
            if not isinstance(data.get(key), str):
                raise ProgramFormatError(f"program field {key!r} must be a string")
        instructions = data.get("instructions")
        if not isinstance(instructions, dict) or not all(
            isinstance(v, str) for v in instructions.values()
        ):
            raise ProgramFormatError("program field 'instructions' must map labels to strings")
        return cls(data["boot"], instructions, data["blank"], data["start"])


def save_program(program: PromptProgram, path: str | Path) -> None:
    Path(path).write_text(program.to_json(), encoding="utf-8", newline="")


def load_program(path: str | Path) -> PromptProgram:
    with open(path, encoding="utf-8", newline="") as fh:
        return PromptProgram.from_json(fh.read())


def _check_alphabet(tm: TuringMachine) -> None:
    if set(tm.symbols) != {"0", "1"}:
        raise UnsupportedAlphabet(
            f"only the alphabet {{0, 1}} compiles, got {{{', '.join(tm.symbols)}}}"
        )


def _step_value(write: str, move: int, next_state: str) -> str:
    sign = "+" if move > 0 else "-"
    return f' op="%[{next_state}]" %[i]="{write}" i{sign}=1 '


def result_value(tm: TuringMachine, state: str, symbol: str) -> str:
    """The unquoted result string the backend must pick for ``(state, symbol)``."""
    rule = tm.action(state, symbol)
    if rule is None:
        return HALT_VALUE
    return _step_value(rule.write, rule.move, rule.next)


def expected_completion(tm: TuringMachine, state: str, symbol: str) -> str:
    _check_alphabet(tm)
    return f'"{result_value(tm, state, symbol)}"'


def is_unconditional(tm: TuringMachine, state: str) -> bool:
    return result_value(tm, state, "0") == result_value(tm, state, "1")


def compile_instruction(tm: TuringMachine, state: str) -> str:
    _check_alphabet(tm)
    default = result_value(tm, state, "0")
    alternative = result_value(tm, state, "1")
    lines = [f'@[boot]result = "{default}"']
    if alternative != default:
        lines.append(f'if @[@[i]]==1 then result = "{alternative}"')
    lines.append("$result")
    return "\n".join(lines) + "\n"


def _boot_block(default: str, condition: str, alternative: str) -> str:
    answer = alternative if condition == "1" else default
    return (
        f'result = "{default}"\n'
        f'if {condition}==1 then result = "{alternative}"\n'
        "$result\n"
        f'"{answer}"\n'
        "\n"
    )


def _exemplar_values(tm: TuringMachine) -> tuple[str, str, str, str]:
    right: list[str] = []
    left: list[str] = []
    for q in tm.states:
        for s in tm.symbols:
            rule = tm.action(q, s)
            if rule is None:
                continue
            value = _step_value(*rule)
            bucket = right if rule.move > 0 else left
            if value not in bucket:
                bucket.append(value)
    # Machines lacking one direction still get exemplars of both.
    if not right:
        right.append(_step_value(tm.blank, +1, tm.start))
    if not left:
        left.append(_step_value(tm.blank, -1, tm.start))
    return right[0], right[-1], left[0], left[-1]


def compile_boot(tm: TuringMachine) -> str:
    """Few-shot preamble demonstrating the if-then/``$result`` evaluation.

    Thirteen blocks: alternating false/true conditions over right- and
    left-moving values of the machine itself, the halt value under both
    outcomes, and a closing run of mixed cases.
    """
    _check_alphabet(tm)
    r1, r2, l1, l2 = _exemplar_values(tm)
    blocks = [
        (r1, "0", l1),
        (r1, "1", l1),
        (l1, "0", r2),
        (l1, "1", r2),
        (r2, "0", l2),
        (r2, "1", l2),
        (l2, "0", r1),
        (l2, "1", r1),
        (r1, "0", HALT_VALUE),
        (l1, "1", HALT_VALUE),
        (r2, "0", l1),
        (l2, "1", r2),
        (r1, "1", l2),
    ]
    return "\n" + "".join(_boot_block(*block) for block in blocks)


def _check_labels(tm: TuringMachine) -> None:
    for state in tm.states:
        if not _LABEL_RE.fullmatch(state):
            raise LabelClash(f"state {state!r} is not a valid memory label")
        if state in RESERVED_LABELS:
            raise LabelClash(f"state {state!r} collides with a reserved label")
        if _INTEGER_RE.fullmatch(state):
            raise LabelClash(f"state {state!r} collides with a tape cell label")


def compile_program(tm: TuringMachine) -> PromptProgram:
    _check_alphabet(tm)
    _check_labels(tm)
    return PromptProgram(
        boot=compile_boot(tm),
        instructions={q: compile_instruction(tm, q) for q in tm.states},
        blank=tm.blank,
        start=tm.start,
    )


def init_memory(program: PromptProgram, tape0: str, head0: int) -> Memory:
    memory = Memory({"boot": program.boot}, blank=program.blank)
    memory.update(program.instructions)
    for loc, symbol in enumerate(tape0):
        memory[str(loc)] = symbol
    memory["i"] = head0
    memory["op"] = program.instructions[program.start]
    return memory
