"""Acceptance suite.  Each test carries an ``acceptance`` marker and the run
ends with one PASS/FAIL line per criterion."""

import dataclasses
import json
import random
import subprocess
import sys
import time
from pathlib import Path

import pytest

import reference_loops as ref
from conftest import MACHINES, load_machine
from make_parser_vectors import run_vector
from promptvm.backends import Cassette, CassetteMiss, ReplayBackend, RuleBackend
from promptvm.memparse import Memory, NestingOverflow, apply_assignments, apply_updates, substitute, substitute_nested
from promptvm.promptc import compile_program, init_memory, save_program
from promptvm.tm import Outcome, Transition, builtin_file, parse_tm, tm_run, u15_2
from promptvm.verify import Equivalent, enumerate_cases, lockstep_run, verify_transitions
from promptvm.vm import MachineState, run

VECTORS = json.loads((Path(__file__).parent / "data" / "parser_vectors.json").read_text("utf-8"))

# The published U15,2 table, typed in independently of promptvm.tm: state -> (on 0, on 1).
PUBLISHED_TABLE = {
    "A": ("0+B", "1+A"), "B": ("1+C", "1+A"), "C": ("0-G", "0-E"),
    "D": ("0-F", "1-E"), "E": ("1+A", "1-D"), "F": ("1-D", "1-D"),
    "G": ("0+H", "1-G"), "H": ("1-I", "1-G"), "I": ("0+A", "1-J"),
    "J": ("1-K", None), "K": ("0+L", "1+N"), "L": ("0+M", "1+L"),
    "M": ("0-B", "1+L"), "N": ("0-C", "0+O"), "O": ("0+N", "1+N"),
}


def cli(*argv):
    return subprocess.run(
        [sys.executable, "-m", "promptvm", *argv], capture_output=True, check=False
    )


@pytest.mark.acceptance(1, "verify u15_2 with the rule backend: 29/29 exact and semantic, < 1 s")
@pytest.mark.parametrize("mode", ["exact", "semantic"])
def test_verification_suite(u15, mode):
    started = time.perf_counter()
    cases = enumerate_cases(u15, compile_program(u15))
    report = verify_transitions(cases, RuleBackend(), mode)
    elapsed = time.perf_counter() - started
    assert (report.passed, len(report.results)) == (29, 29)
    assert elapsed < 1.0


@pytest.mark.acceptance(2, "lockstep on >=10 seeded random tapes, min(5000 cycles, halt)")
def test_lockstep_random_tapes(u15, u15_program):
    rng = random.Random(20230109)
    tapes = ["".join(rng.choice("01") for _ in range(rng.randint(0, 32))) for _ in range(12)]
    for tape in tapes:
        oracle = tm_run(u15, tape, 0, 5000)
        expected = Equivalent(min(oracle.cycles, 5000), oracle.outcome is Outcome.HALTED)
        assert lockstep_run(u15_program, u15, tape, 0, 5000, RuleBackend()) == expected, tape


@pytest.mark.acceptance(3, "hand-written machines compile and run in lockstep (<= 1000 cycles)")
@pytest.mark.parametrize(
    "name, tape, head",
    [("unary_successor", "111", 0), ("unary_successor", "", 0), ("bb2", "", 0), ("bb3", "", 0),
     ("eraser", "0111", 3), ("sweeper", "0101", 0), ("zigzag", "1", -2)],
)
def test_compiler_generality(name, tape, head):
    m = load_machine(name)
    oracle = tm_run(m, tape, head, 1000)
    result = lockstep_run(compile_program(m), m, tape, head, 1000, RuleBackend())
    assert result == Equivalent(min(oracle.cycles, 1000), oracle.outcome is Outcome.HALTED)


@pytest.mark.acceptance(3, "hand-written machines compile and run in lockstep (<= 1000 cycles)")
def test_corpus_covers_required_shapes():
    m = load_machine("unary_successor")
    assert any(symbol == m.blank for _, symbol in m.halting)
    assert any(m.action(s, "0") == m.action(s, "1") for s in m.states)


def _impl(vector):
    memory = Memory(vector["memory"], blank=vector["blank"])
    text, sigil = vector["text"], vector["sigil"]
    try:
        if vector["op"] == "substitute":
            out = substitute(text, sigil, memory)
        elif vector["op"] == "substitute_nested":
            out = substitute_nested(text, sigil, memory)
        elif vector["op"] == "assignments":
            out = apply_assignments(text, memory)
        elif vector["op"] == "updates":
            apply_updates(text, memory)
            out = None
        else:
            out = apply_assignments(substitute(text, sigil, memory), memory)
            apply_updates(out, memory)
    except NestingOverflow:
        return {"error": "NestingOverflow"}
    return {"output": out, "memory": dict(memory)}


@pytest.mark.acceptance(4, "parser corpus (>= 20 vectors) matches the regex oracle byte-exactly")
def test_parser_conformance():
    names = {v["name"] for v in VECTORS}
    assert len(VECTORS) >= 20
    assert {"assign_multiline_embedded_quotes", "subst_negative_label", "assign_negative_label",
            "post_suffix_only_updates", "subst_single_pass"} <= names
    assert ref.ASSIGN.pattern.startswith("(?s)")
    for vector in VECTORS:
        oracle = run_vector(vector["op"], vector["sigil"], vector["text"], vector["memory"], vector["blank"])
        oracle = json.loads(json.dumps(oracle))
        assert oracle == vector["expected"], vector["name"]
        assert _impl(vector) == vector["expected"], vector["name"]


@pytest.mark.acceptance(5, "u15_2 matches the published table: 29 transitions, T = {(J,1)}, shipped file agrees")
def test_transition_table_fidelity():
    m = u15_2()
    expected = {}
    for state, pair in PUBLISHED_TABLE.items():
        for symbol, entry in zip("01", pair):
            if entry is not None:
                expected[state, symbol] = Transition(entry[0], 1 if entry[1] == "+" else -1, entry[2])
    assert dict(m.transitions) == expected
    assert len(m.transitions) == 29
    assert m.halting == {("J", "1")}
    assert parse_tm(builtin_file("u15_2")) == m


@pytest.mark.acceptance(6, "identical runs trace byte-identically; record/replay; perturbed replay misses")
def test_determinism_and_replay(tmp_path):
    args = ["run", "--builtin", "u15_2", "--tape", "0110", "--max-cycles", "60", "--trace"]
    first, second = cli(*args), cli(*args)
    assert first.returncode == second.returncode == 4
    assert first.stdout and first.stdout == second.stdout

    cassette = tmp_path / "u15.jsonl"
    recorded = cli("record", str(cassette), *args)
    replayed = cli("replay", str(cassette), *args)
    assert recorded.stdout == replayed.stdout == first.stdout

    program = compile_program(u15_2())
    perturbed = dataclasses.replace(program, boot=program.boot + "\n")
    path = tmp_path / "perturbed.json"
    save_program(perturbed, path)
    missed = cli("replay", str(cassette), "run", "--program", str(path), "--tape", "0110", "--max-cycles", "60")
    assert missed.returncode == 3 and b"CassetteMiss" in missed.stdout + missed.stderr

    state = MachineState(init_memory(perturbed, "0110", 0), ReplayBackend(Cassette.load(cassette)))
    report = run(state, 60)
    assert report.outcome is Outcome.FAILED and isinstance(report.error, CassetteMiss)


@pytest.mark.acceptance(7, "looping machine stops at exactly max_cycles, not halted, exit 4")
def test_non_halting_guard():
    program = compile_program(load_machine("sweeper"))
    report = run(MachineState(init_memory(program, "", 0), RuleBackend()), 777)
    assert (report.outcome, report.cycles) == (Outcome.NOT_HALTED, 777)
    done = cli("run", "--tm", str(MACHINES / "sweeper.tm"), "--max-cycles", "777")
    assert done.returncode == 4
    assert json.loads(done.stdout) == {"outcome": "not_halted", "cycles": 777, "state": "W", "head": 777}


@pytest.mark.acceptance(8, "10,000 VM cycles with the rule backend in < 5 s")
def test_performance(u15_program):
    state = MachineState(init_memory(u15_program, "0110101", 0), RuleBackend())
    started = time.perf_counter()
    report = run(state, 10_000, keep_trace=False)
    elapsed = time.perf_counter() - started
    assert report.cycles == 10_000
    assert elapsed < 5.0
