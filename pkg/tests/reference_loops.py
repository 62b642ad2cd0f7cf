"""Reference text processors driven by Python's backtracking ``re`` engine.

These follow the published loops statement for statement and serve as the
oracle for the hand-written scanners in ``promptvm.memparse``.  Two edits:

* the splice label class is ``(?:\\w|\\-)+`` so negative tape labels resolve;
* ``substitute`` starts from ``suffix = string`` so a text with no splice
  comes back unchanged rather than empty.

All patterns are compiled with ``re.ASCII`` (``\\w`` is [A-Za-z0-9_]).
"""

import re

ASSIGN = re.compile(r'(?s)(?:((?:\w|\-)+)\s*=\s*(?:\"((?:.*\n)|(?:[^\"]*))\"))(.*)', re.ASCII)
UPDATE = re.compile(r"(\w+)\s*((?:\+|\-)=)\s*(\d+)", re.ASCII)


def splice_regex(char):
    return re.compile(rf"(?s)(.*?)(?:{re.escape(char)}\[((?:\w|\-)+)\])(.*)", re.ASCII)


def assignments(string, memory):
    matches = ASSIGN.findall(string)
    suffix = ""
    while len(matches) > 0:
        label, value, suffix = matches[0]
        memory[label] = value
        matches = ASSIGN.findall(suffix)
    return suffix


def substitute(string, char, memory, blank):
    regex = splice_regex(char)
    matches = regex.findall(string)
    out = ""
    suffix = string
    while len(matches) > 0:
        prefix, label, suffix = matches[0]
        if label not in memory:
            memory[label] = blank
        out += prefix + str(memory[label])
        matches = regex.findall(suffix)
    out += suffix
    return out


def substitute_nested(string, char, memory, blank, max_passes=8):
    regex = splice_regex(char)
    passes = 0
    while regex.match(string) is not None:
        if passes == max_passes:
            raise RecursionError("nesting overflow")
        string = substitute(string, char, memory, blank)
        passes += 1
    return string


def updates(string, memory):
    for label, operator, valuestring in UPDATE.findall(string):
        sign = 1 if operator == "+=" else -1
        value = int(valuestring) * sign
        if label in memory and isinstance(memory[label], int):
            memory[label] += value
        else:
            memory[label] = value
