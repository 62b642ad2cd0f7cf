"""Command line entry point.

Exit status: 0 success, 1 verification failure or divergence, 2 usage or
input error, 3 backend error, 4 run stopped at its cycle limit.
"""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import ExitStack
from pathlib import Path

from . import backends, promptc, tm, verify, vm
from .memparse import NestingOverflow

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BACKEND, EXIT_NOT_HALTED = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def _machine_args(parser: argparse.ArgumentParser, required: bool = True) -> None:
    group = parser.add_mutually_exclusive_group(required=required)
    group.add_argument("--builtin", metavar="NAME", help=f"built-in machine ({', '.join(tm.BUILTINS)})")
    group.add_argument("--tm", metavar="FILE", help="machine file")


def _tape_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tape", default="", help="initial tape contents from cell 0 (default: empty)")
    parser.add_argument("--head", type=int, default=0, help="initial head position (default: 0)")


def _backend_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--program", metavar="FILE", help="compiled program file (default: compile the machine)")
    parser.add_argument("--backend", choices=("rule", "http", "replay"), default="rule")
    parser.add_argument("--backend-config", metavar="FILE", help="JSON config for the http backend")
    parser.add_argument("--cassette", metavar="FILE", help="cassette to replay from (replay backend)")
    parser.add_argument("--record", metavar="FILE", help="record every backend exchange to this cassette")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="promptvm", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a machine to a prompt program file")
    _machine_args(p)
    p.add_argument("-o", "--output", metavar="FILE", help="write here instead of stdout")

    p = sub.add_parser("run", help="execute a prompt program")
    _machine_args(p, required=False)
    _tape_args(p)
    _backend_args(p)
    p.add_argument("--max-cycles", type=int, default=vm.DEFAULT_MAX_CYCLES)
    p.add_argument("--trace", action="store_true", help="stream JSON Lines trace records to stdout")
    p.add_argument("--trace-out", metavar="FILE", help="write the JSON Lines trace to a file")

    p = sub.add_parser("oracle", help="run the machine directly")
    _machine_args(p)
    _tape_args(p)
    p.add_argument("--max-steps", type=int, default=vm.DEFAULT_MAX_CYCLES)

    p = sub.add_parser("verify", help="check the backend on every (state, symbol) case")
    _machine_args(p)
    _backend_args(p)
    p.add_argument("--mode", choices=("exact", "semantic"), default="exact")
    p.add_argument("--report", metavar="FILE", help="write the JSON report here instead of stdout")

    p = sub.add_parser("lockstep", help="run program and machine side by side")
    _machine_args(p)
    _tape_args(p)
    _backend_args(p)
    p.add_argument("--max-cycles", type=int, default=10_000)

    for name, text in (("record", "record backend exchanges of"), ("replay", "replay a cassette into")):
        p = sub.add_parser(name, help=f"{text} a run or verify command")
        p.add_argument("cassette_path", metavar="CASSETTE")
        p.add_argument("wrapped", choices=("run", "verify"))
        p.add_argument("args", nargs=argparse.REMAINDER)
    return parser


def _load_machine(args) -> tm.TuringMachine:
    if args.builtin is not None:
        try:
            return tm.BUILTINS[args.builtin]()
        except KeyError:
            raise UsageError(f"unknown builtin machine {args.builtin!r}") from None
    try:
        text = Path(args.tm).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read machine file {args.tm}: {exc.strerror or exc}") from None
    try:
        return tm.parse_tm(text)
    except tm.MachineError as exc:
        raise UsageError(f"{args.tm}: {exc}") from None


def _load_program(args, machine: tm.TuringMachine | None) -> promptc.PromptProgram:
    if args.program:
        try:
            return promptc.load_program(args.program)
        except OSError as exc:
            raise UsageError(f"cannot read program file {args.program}: {exc.strerror or exc}") from None
        except promptc.ProgramFormatError as exc:
            raise UsageError(f"{args.program}: {exc}") from None
    if machine is None:
        raise UsageError("one of --builtin, --tm or --program is required")
    return promptc.compile_program(machine)


def _make_backend(args, stack: ExitStack):
    if args.backend == "rule":
        backend = backends.RuleBackend()
    elif args.backend == "http":
        if not args.backend_config:
            raise UsageError("--backend http needs --backend-config")
        try:
            config = backends.HttpBackendConfig.load(args.backend_config)
        except OSError as exc:
            raise UsageError(f"cannot read {args.backend_config}: {exc.strerror or exc}") from None
        except TypeError as exc:
            raise UsageError(f"{args.backend_config}: {exc}") from None
        backend = backends.HttpBackend(config)
        stack.callback(backend.close)
    else:
        if not args.cassette:
            raise UsageError("--backend replay needs --cassette")
        try:
            backend = backends.ReplayBackend(backends.Cassette.load(args.cassette))
        except OSError as exc:
            raise UsageError(f"cannot read cassette {args.cassette}: {exc.strerror or exc}") from None
    if args.record:
        backend = backends.RecordingBackend(backend, args.record)
    return backend


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)


def cmd_compile(args) -> int:
    program = promptc.compile_program(_load_machine(args))
    _emit(program.to_json(), args.output)
    return EXIT_OK


def cmd_oracle(args) -> int:
    machine = _load_machine(args)
    result = tm.tm_run(machine, args.tape, args.head, args.max_steps)
    summary = {
        "outcome": result.outcome.value,
        "steps": result.steps,
        "cycles": result.cycles,
        "state": result.final.state,
        "head": result.final.head,
        "tape": {str(k): v for k, v in result.final.tape.normal_form().items()},
    }
    print(json.dumps(summary))
    return EXIT_OK if result.outcome is tm.Outcome.HALTED else EXIT_NOT_HALTED


def cmd_run(args, stack: ExitStack) -> int:
    machine = _load_machine(args) if (args.builtin or args.tm) else None
    program = _load_program(args, machine)
    backend = _make_backend(args, stack)
    state = vm.MachineState(promptc.init_memory(program, args.tape, args.head), backend)
    sinks = []
    if args.trace:
        sinks.append(sys.stdout)
    if args.trace_out:
        sinks.append(stack.enter_context(open(args.trace_out, "w", encoding="utf-8", newline="")))
    if sinks:
        def write_event(event: vm.TraceEvent) -> None:
            line = event.to_json() + "\n"
            for sink in sinks:
                sink.write(line)

        state.trace_sink = write_event
    report = vm.run(state, args.max_cycles, keep_trace=False)
    decoded = vm.decode_state(state.memory, program)
    summary = {
        "outcome": report.outcome.value,
        "cycles": report.cycles,
        "state": decoded.value if isinstance(decoded, tm.Outcome) else decoded,
        "head": state.memory.get("i"),
    }
    if report.error is not None:
        summary["error"] = f"{type(report.error).__name__}: {report.error}"
    print(json.dumps(summary), file=sys.stderr if args.trace else sys.stdout)
    if report.outcome is tm.Outcome.FAILED:
        if isinstance(report.error, backends.BackendError):
            return EXIT_BACKEND
        return EXIT_FAIL
    return EXIT_OK if report.outcome is tm.Outcome.HALTED else EXIT_NOT_HALTED


def cmd_verify(args, stack: ExitStack) -> int:
    machine = _load_machine(args)
    program = _load_program(args, machine)
    backend = _make_backend(args, stack)
    report = verify.verify_transitions(verify.enumerate_cases(machine, program), backend, args.mode)
    _emit(report.to_json(), args.report)
    print(f"{report.passed}/{len(report.results)} cases passed ({args.mode})", file=sys.stderr)
    for result in report.failed:
        symbol = "*" if result.case.symbol is None else result.case.symbol
        print(f"  FAIL ({result.case.state},{symbol}): {result.error or repr(result.actual)}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_lockstep(args, stack: ExitStack) -> int:
    machine = _load_machine(args)
    program = _load_program(args, machine)
    backend = _make_backend(args, stack)
    try:
        outcome = verify.lockstep_run(program, machine, args.tape, args.head, args.max_cycles, backend)
    except backends.BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except NestingOverflow as exc:
        print(f"program error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if isinstance(outcome, verify.DivergenceReport):
        print(f"divergence at {outcome}", file=sys.stderr)
        return EXIT_FAIL
    print(json.dumps({"equivalent": True, "cycles": outcome.cycles, "halted": outcome.halted}))
    return EXIT_OK


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.command in ("record", "replay"):
        inner = [args.wrapped, *args.args]
        if args.command == "record":
            inner += ["--record", args.cassette_path]
        else:
            inner += ["--backend", "replay", "--cassette", args.cassette_path]
        return dispatch(inner)
    handlers = {"run": cmd_run, "verify": cmd_verify, "lockstep": cmd_lockstep}
    try:
        with ExitStack() as stack:
            if args.command == "compile":
                return cmd_compile(args)
            if args.command == "oracle":
                return cmd_oracle(args)
            return handlers[args.command](args, stack)
    except (UsageError, promptc.CompileError, tm.MachineError, backends.BackendConfigError,
            backends.CassetteError) as exc:
        print(f"promptvm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except backends.BackendError as exc:
        print(f"promptvm: backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except OSError as exc:
        print(f"promptvm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv: list[str] | None = None) -> None:
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
