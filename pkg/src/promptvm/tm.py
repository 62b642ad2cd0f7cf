"""Direct Turing machine interpreter, the built-in U(15,2), and the machine
file format."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, NamedTuple


class Outcome(enum.Enum):
    HALTED = "halted"
    NOT_HALTED = "not_halted"
    FAILED = "failed"


class MachineError(ValueError):
    pass


class DomainError(MachineError):
    """State or symbol outside the machine."""


class ValidationError(MachineError):
    pass


class MachineSyntaxError(MachineError):
    def __init__(self, lineno: int, message: str) -> None:
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class Transition(NamedTuple):
    write: str
    move: int
    next: str


@dataclass(frozen=True)
class TuringMachine:
    states: tuple[str, ...]
    symbols: tuple[str, ...]
    blank: str
    start: str
    halting: frozenset[tuple[str, str]]
    transitions: Mapping[tuple[str, str], Transition] = field(hash=False)

    def __post_init__(self) -> None:
        states, symbols = set(self.states), set(self.symbols)
        if len(states) != len(self.states):
            raise ValidationError("duplicate state label")
        if len(symbols) != len(self.symbols):
            raise ValidationError("duplicate symbol")
        if self.blank not in symbols:
            raise ValidationError(f"blank {self.blank!r} is not a tape symbol")
        if self.start not in states:
            raise ValidationError(f"start state {self.start!r} is not declared")
        for q, s in self.halting:
            if q not in states or s not in symbols:
                raise ValidationError(f"halting pair ({q},{s}) outside the machine")
        for (q, s), (write, move, nxt) in self.transitions.items():
            if (q, s) in self.halting:
                raise ValidationError(f"({q},{s}) is both halting and has a rule")
            if q not in states or s not in symbols:
                raise ValidationError(f"rule for ({q},{s}) outside the machine")
            if write not in symbols or nxt not in states:
                raise ValidationError(f"rule for ({q},{s}) targets an unknown symbol or state")
            if move not in (-1, 1):
                raise ValidationError(f"rule for ({q},{s}) has move {move!r}")
        for q in self.states:
            for s in self.symbols:
                if (q, s) not in self.halting and (q, s) not in self.transitions:
                    raise ValidationError(f"missing rule for ({q},{s})")

    def action(self, state: str, symbol: str) -> Transition | None:
        """The transition for ``(state, symbol)``, or None for a halting pair."""
        if (state, symbol) in self.halting:
            return None
        try:
            return self.transitions[state, symbol]
        except KeyError:
            raise DomainError(f"({state},{symbol}) is outside the machine") from None


class Tape:
    """Sparse bi-infinite tape; no stored cell ever holds the blank."""

    def __init__(self, blank: str, cells: Mapping[int, str] | None = None) -> None:
        self.blank = blank
        self.cells: dict[int, str] = {}
        for index, symbol in (cells or {}).items():
            self.write(index, symbol)

    def read(self, index: int) -> str:
        return self.cells.get(index, self.blank)

    def write(self, index: int, symbol: str) -> None:
        if symbol == self.blank:
            self.cells.pop(index, None)
        else:
            self.cells[index] = symbol

    def normal_form(self) -> dict[int, str]:
        return dict(sorted(self.cells.items()))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tape):
            return NotImplemented
        return self.blank == other.blank and self.cells == other.cells

    def __repr__(self) -> str:
        return f"Tape({self.normal_form()!r}, blank={self.blank!r})"


@dataclass
class Configuration:
    state: str
    head: int
    tape: Tape

    def copy(self) -> Configuration:
        return Configuration(self.state, self.head, Tape(self.tape.blank, self.tape.cells))


def tm_step(config: Configuration, tm: TuringMachine) -> Configuration | Outcome:
    """Advance ``config`` in place by one transition.

    Returns ``Outcome.HALTED`` (leaving the configuration untouched) when the
    current (state, symbol) pair is a halting pair.
    """
    symbol = config.tape.read(config.head)
    if config.state not in tm.states or symbol not in tm.symbols:
        raise DomainError(f"({config.state},{symbol}) is outside the machine")
    rule = tm.action(config.state, symbol)
    if rule is None:
        return Outcome.HALTED
    config.tape.write(config.head, rule.write)
    config.head += rule.move
    config.state = rule.next
    return config


@dataclass
class RunResult:
    outcome: Outcome
    steps: int
    final: Configuration

    @property
    def cycles(self) -> int:
        """Compute cycles, counting the final halting encounter as one."""
        return self.steps + (1 if self.outcome is Outcome.HALTED else 0)


def initial_configuration(tm: TuringMachine, tape0: str, head0: int) -> Configuration:
    for symbol in tape0:
        if symbol not in tm.symbols:
            raise DomainError(f"tape symbol {symbol!r} is not in the machine alphabet")
    return Configuration(tm.start, head0, Tape(tm.blank, dict(enumerate(tape0))))


def tm_run(tm: TuringMachine, tape0: str, head0: int, max_steps: int) -> RunResult:
    if max_steps < 0:
        raise ValueError("max_steps must be non-negative")
    config = initial_configuration(tm, tape0, head0)
    steps = 0
    while steps < max_steps:
        if tm_step(config, tm) is Outcome.HALTED:
            return RunResult(Outcome.HALTED, steps, config)
        steps += 1
    # Detecting a halting pair costs no step.
    if tm.action(config.state, config.tape.read(config.head)) is None:
        return RunResult(Outcome.HALTED, steps, config)
    return RunResult(Outcome.NOT_HALTED, steps, config)


_MOVES = {"L": -1, "R": 1}
_MOVE_NAMES = {-1: "L", 1: "R"}


def parse_tm(text: str) -> TuringMachine:
    """Parse the line-based machine format.

    ::

        states: A B C
        symbols: 0 1
        blank: 0
        start: A
        halt: C 1
        rule: A 0 -> 1 R B
    """
    headers: dict[str, tuple[int, list[str]]] = {}
    halting: list[tuple[str, str]] = []
    rules: dict[tuple[str, str], Transition] = {}
    rule_lines: dict[tuple[str, str], int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, rest = line.partition(":")
        key = key.strip()
        if not sep:
            raise MachineSyntaxError(lineno, f"expected 'key: value', got {raw.strip()!r}")
        words = rest.split()
        if key in ("states", "symbols", "blank", "start"):
            if key in headers:
                raise MachineSyntaxError(lineno, f"duplicate '{key}' line")
            if not words or (key in ("blank", "start") and len(words) != 1):
                raise MachineSyntaxError(lineno, f"bad '{key}' line")
            headers[key] = (lineno, words)
        elif key == "halt":
            if len(words) != 2:
                raise MachineSyntaxError(lineno, "expected 'halt: STATE SYMBOL'")
            halting.append((words[0], words[1]))
        elif key == "rule":
            if len(words) != 6 or words[2] != "->":
                raise MachineSyntaxError(lineno, "expected 'rule: STATE SYMBOL -> WRITE MOVE NEXT'")
            q, s, _, write, move, nxt = words
            if move not in _MOVES:
                raise MachineSyntaxError(lineno, f"move must be L or R, got {move!r}")
            if (q, s) in rules:
                raise ValidationError(
                    f"duplicate rule for ({q},{s}) on lines {rule_lines[q, s]} and {lineno}"
                )
            rules[q, s] = Transition(write, _MOVES[move], nxt)
            rule_lines[q, s] = lineno
        else:
            raise MachineSyntaxError(lineno, f"unknown key {key!r}")
    for key in ("states", "symbols", "blank", "start"):
        if key not in headers:
            raise ValidationError(f"missing '{key}' line")
    if len(set(halting)) != len(halting):
        raise ValidationError("duplicate halting pair")
    return TuringMachine(
        states=tuple(headers["states"][1]),
        symbols=tuple(headers["symbols"][1]),
        blank=headers["blank"][1][0],
        start=headers["start"][1][0],
        halting=frozenset(halting),
        transitions=rules,
    )


def render_tm(tm: TuringMachine) -> str:
    """Canonical text form; rules follow the declared state and symbol order."""
    lines = [
        f"states: {' '.join(tm.states)}",
        f"symbols: {' '.join(tm.symbols)}",
        f"blank: {tm.blank}",
        f"start: {tm.start}",
    ]
    for q in tm.states:
        for s in tm.symbols:
            if (q, s) in tm.halting:
                lines.append(f"halt: {q} {s}")
    for q in tm.states:
        for s in tm.symbols:
            rule = tm.transitions.get((q, s))
            if rule is not None:
                lines.append(f"rule: {q} {s} -> {rule.write} {_MOVE_NAMES[rule.move]} {rule.next}")
    return "\n".join(lines) + "\n"


# The published 15-state, 2-symbol universal machine: state -> ((write, move, next) on 0, on 1).
_U15_2_TABLE = {
    "A": (("0", +1, "B"), ("1", +1, "A")),
    "B": (("1", +1, "C"), ("1", +1, "A")),
    "C": (("0", -1, "G"), ("0", -1, "E")),
    "D": (("0", -1, "F"), ("1", -1, "E")),
    "E": (("1", +1, "A"), ("1", -1, "D")),
    "F": (("1", -1, "D"), ("1", -1, "D")),
    "G": (("0", +1, "H"), ("1", -1, "G")),
    "H": (("1", -1, "I"), ("1", -1, "G")),
    "I": (("0", +1, "A"), ("1", -1, "J")),
    "J": (("1", -1, "K"), None),
    "K": (("0", +1, "L"), ("1", +1, "N")),
    "L": (("0", +1, "M"), ("1", +1, "L")),
    "M": (("0", -1, "B"), ("1", +1, "L")),
    "N": (("0", -1, "C"), ("0", +1, "O")),
    "O": (("0", +1, "N"), ("1", +1, "N")),
}


def u15_2() -> TuringMachine:
    transitions = {}
    halting = set()
    for state, row in _U15_2_TABLE.items():
        for symbol, entry in zip("01", row):
            if entry is None:
                halting.add((state, symbol))
            else:
                transitions[state, symbol] = Transition(*entry)
    return TuringMachine(
        states=tuple(_U15_2_TABLE),
        symbols=("0", "1"),
        blank="0",
        start="A",
        halting=frozenset(halting),
        transitions=transitions,
    )


BUILTINS = {"u15_2": u15_2}


def builtin_file(name: str) -> str:
    """Text of a machine file shipped with the package."""
    return resources.files("promptvm").joinpath("machines", f"{name}.tm").read_text("utf-8")
