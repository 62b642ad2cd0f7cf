"""Associative memory and the finite-state text processors that connect it
to a completion backend.

Every scanner here is hand-written and runs in a single left-to-right sweep
(plus one backward search for multi-line assignment values).  They reproduce,
byte for byte, what the reference regular expressions below produce under a
leftmost-first backtracking engine; those literals are kept as the normative
definition and are exercised by the test-suite oracle.
"""

from __future__ import annotations

from typing import Union

Value = Union[str, int]

ASSIGN_PATTERN = r'(?s)(?:((?:\w|\-)+)\s*=\s*(?:\"((?:.*\n)|(?:[^\"]*))\"))(.*)'
UPDATE_PATTERN = r"(\w+)\s*((?:\+|\-)=)\s*(\d+)"


def substitute_pattern(sigil: str) -> str:
    return rf"(?s)(.*?)(?:{sigil}\[((?:\w|\-)+)\])(.*)"


_WORD = frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_")
_LABEL = _WORD | {"-"}
_DIGITS = frozenset("0123456789")
_SPACE = frozenset(" \t\n\r\f\v")
SIGILS = ("@", "%")


class NestingOverflow(RuntimeError):
    """Nested splicing did not reach a fixed point within the pass budget."""

    def __init__(self, sigil: str, passes: int) -> None:
        super().__init__(f"{sigil}[...] patterns still present after {passes} passes")
        self.sigil = sigil
        self.passes = passes


class Memory(dict):
    """String-keyed store; ``blank`` is what an unbound label reads as."""

    def __init__(self, bindings=(), blank: str = "0") -> None:
        super().__init__(bindings)
        self.blank = blank

    def copy(self) -> Memory:
        return Memory(self, blank=self.blank)

    def read(self, label: str) -> Value:
        """Return the value at ``label``, binding it to blank first if needed."""
        if label not in self:
            self[label] = self.blank
        return self[label]

    def __repr__(self) -> str:
        return f"Memory({dict.__repr__(self)}, blank={self.blank!r})"


def render(value: Value) -> str:
    return str(value)


def _run_end(text: str, start: int, charset: frozenset) -> int:
    end = start
    n = len(text)
    while end < n and text[end] in charset:
        end += 1
    return end


def _skip_space(text: str, pos: int) -> int:
    return _run_end(text, pos, _SPACE)


def find_splice(text: str, sigil: str, start: int = 0) -> tuple[int, int, str] | None:
    """Locate the leftmost ``sigil[label]`` at or after ``start``.

    Returns ``(begin, end, label)`` with ``end`` one past the closing bracket.
    """
    opener = sigil + "["
    pos = text.find(opener, start)
    while pos != -1:
        label_end = _run_end(text, pos + 2, _LABEL)
        if label_end > pos + 2 and label_end < len(text) and text[label_end] == "]":
            return pos, label_end + 1, text[pos + 2 : label_end]
        pos = text.find(opener, pos + 1)
    return None


def has_splice(text: str, sigil: str) -> bool:
    return find_splice(text, sigil) is not None


def substitute(text: str, sigil: str, memory: Memory) -> str:
    """Replace every ``sigil[label]`` with the rendered memory value.

    A single pass: spliced values are never rescanned.
    """
    if sigil not in SIGILS:
        raise ValueError(f"unsupported sigil {sigil!r}")
    found = find_splice(text, sigil)
    if found is None:
        return text
    parts = []
    pos = 0
    while found is not None:
        begin, end, label = found
        parts.append(text[pos:begin])
        parts.append(render(memory.read(label)))
        pos = end
        found = find_splice(text, sigil, pos)
    parts.append(text[pos:])
    return "".join(parts)


def substitute_nested(text: str, sigil: str, memory: Memory, max_passes: int = 8) -> str:
    if max_passes < 1:
        raise ValueError("max_passes must be at least 1")
    passes = 0
    while has_splice(text, sigil):
        if passes == max_passes:
            raise NestingOverflow(sigil, passes)
        text = substitute(text, sigil, memory)
        passes += 1
    return text


def _match_assignment(text: str, label_end: int) -> tuple[str, int] | None:
    # Everything after the label: \s*=\s*" then a quoted value.
    pos = _skip_space(text, label_end)
    if pos >= len(text) or text[pos] != "=":
        return None
    pos = _skip_space(text, pos + 1)
    if pos >= len(text) or text[pos] != '"':
        return None
    body = pos + 1
    # Greedy multi-line alternative wins whenever some line break is
    # directly followed by a quote; it ends at the last such pair.
    brk = text.rfind('\n"', body)
    if brk != -1:
        return text[body : brk + 1], brk + 2
    close = text.find('"', body)
    if close == -1:
        return None
    return text[body:close], close + 1


def scan_assignments(text: str) -> tuple[list[tuple[str, str]], str]:
    """Parse ``label = "value"`` assignments without touching memory.

    Returns the assignments in order and the remainder after the last one,
    which is the empty string when nothing matched.
    """
    found: list[tuple[str, str]] = []
    suffix = ""
    while True:
        pos = 0
        n = len(text)
        hit = None
        while pos < n:
            if text[pos] in _LABEL:
                end = _run_end(text, pos, _LABEL)
                tail = _match_assignment(text, end)
                if tail is not None:
                    hit = text[pos:end], tail[0], tail[1]
                    break
                pos = end
            else:
                pos += 1
        if hit is None:
            return found, suffix
        label, value, rest = hit
        found.append((label, value))
        text = suffix = text[rest:]


def apply_assignments(text: str, memory: Memory) -> str:
    bindings, suffix = scan_assignments(text)
    for label, value in bindings:
        memory[label] = value
    return suffix


def scan_updates(text: str) -> list[tuple[str, int]]:
    """Find every ``label += n`` / ``label -= n`` as ``(label, signed delta)``."""
    found = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos] not in _WORD:
            pos += 1
            continue
        end = _run_end(text, pos, _WORD)
        op = _skip_space(text, end)
        if op + 1 < n and text[op] in "+-" and text[op + 1] == "=":
            num = _skip_space(text, op + 2)
            num_end = _run_end(text, num, _DIGITS)
            if num_end > num:
                delta = int(text[num:num_end])
                found.append((text[pos:end], delta if text[op] == "+" else -delta))
                pos = num_end
                continue
        pos = end
    return found


def apply_updates(text: str, memory: Memory) -> list[tuple[str, int]]:
    """Apply integer updates in textual order; returns what was applied.

    A label holding text (or nothing) restarts from zero.
    """
    applied = scan_updates(text)
    for label, delta in applied:
        current = memory.get(label)
        if isinstance(current, int) and not isinstance(current, bool):
            memory[label] = current + delta
        else:
            memory[label] = delta
    return applied
