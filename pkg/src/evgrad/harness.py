"""Command-line driver and benchmark runner."""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from evgrad import benchmarks as B
from evgrad.checker import TypeCheckError
from evgrad.dynamizer import ConfigError, sample_lattice, write_configs
from evgrad.pipeline import PASSES, STAGES, CompileOptions, compile_program, front_end, run_compiled
from evgrad.runtime import MODES, CounterReport, show_value
from evgrad.surface import LexError, ParseError, parse_program
from evgrad.typelattice import show_type

EXIT_OK = 0
EXIT_STATIC = 2
EXIT_CAST = 3
EXIT_RUNTIME = 4
EXIT_USAGE = 64

CSV_HEADER = (
    "benchmark", "config", "ratio", "mode", "dfo", "typing", "time_s", "reps",
    "trans_ops", "proxy_allocs", "heap_allocs", "float_boxes", "germ_checks", "outcome",
)

SAMPLED_REPS = 10
ENDPOINT_REPS = 50
ENDPOINTS = ("typed", "untyped")


@dataclass
class RunRecord:
    benchmark: str
    config: str
    ratio: float
    mode: str
    dfo: bool
    typing: str
    disabled: tuple
    time_s: float | None
    reps: int
    counters: CounterReport = field(default_factory=CounterReport)
    outcome: str = "value"

    def row(self) -> list:
        c = self.counters
        return [
            self.benchmark, self.config, f"{self.ratio:.4f}", self.mode, int(self.dfo), self.typing,
            "" if self.outcome != "value" or self.time_s is None else f"{self.time_s:.6f}",
            self.reps, c.trans_ops, c.proxy_allocs, c.heap_allocs, c.float_boxes, c.germ_checks, self.outcome,
        ]


def emit_csv(records, path) -> Path:
    """Write records sorted by (benchmark, ratio) under the fixed header."""
    out = Path(path)
    try:
        with out.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for r in sorted(records, key=lambda r: (r.benchmark, r.ratio, r.config, r.mode)):
                w.writerow(r.row())
    except OSError as err:
        raise OSError(f"cannot write {out}: {err}") from err
    return out


def measure(program, options: CompileOptions, inputs, reps: int):
    """Compile once, run `reps` times. Returns (mean VM time, last result) or a static error."""
    try:
        compiled = compile_program(program, options)
    except (TypeCheckError, ParseError, LexError) as err:
        return None, err
    total, result = 0.0, None
    for _ in range(reps):
        result = run_compiled(compiled, inputs=inputs)
        total += result.time_s
        if not result.ok:
            break
    return total / reps, result


def _run_config(job):
    bench, sample, mode, dfo, typing, disabled, reps = job
    options = CompileOptions(mode, typing, dfo, frozenset(disabled))
    mean, result = measure(sample.program, options, bench.inputs, reps)
    if isinstance(result, Exception):
        return RunRecord(bench.name, sample.config_id, sample.ratio, mode, dfo, typing, tuple(disabled),
                         None, reps, CounterReport(), "other-error")
    return RunRecord(bench.name, sample.config_id, sample.ratio, mode, dfo, typing, tuple(disabled),
                     mean, reps, result.counters, result.outcome)


def run_benchmark_suite(
    benchmarks=None, modes=MODES, reps: int | None = None, seed: int = 0, dfo: bool = False,
    typing: str = "gradual", disabled=(), samples_per_node: int = 10, bins: int = 10,
    parallel: bool = False, progress=None,
) -> list[RunRecord]:
    """Dynamize each benchmark and run every configuration in every mode.

    Sampled configurations get `reps` repetitions (default 10), the two
    endpoints five times as many (default 50). Failures become rows.
    """
    benches = list(benchmarks) if benchmarks is not None else B.suite()
    jobs = []
    for bench in benches:
        samples = sample_lattice(parse_program(bench.source), samples_per_node, bins, seed)
        for sample in samples:
            endpoint = sample.config_id in ENDPOINTS
            n = (reps * 5 if reps else ENDPOINT_REPS) if endpoint else (reps or SAMPLED_REPS)
            for mode in modes:
                jobs.append((bench, sample, mode, dfo, typing, tuple(disabled), n))
    if parallel:
        with ProcessPoolExecutor() as pool:
            return list(pool.map(_run_config, jobs, chunksize=8))
    records = []
    for i, job in enumerate(jobs):
        records.append(_run_config(job))
        if progress:
            progress(i + 1, len(jobs))
    return records


# ---------------------------------------------------------------------- CLI


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_compile_flags(p):
    p.add_argument("--mode", choices=MODES, default="g")
    p.add_argument("--typing", choices=("gradual", "static", "dynamic"), default="gradual")
    p.add_argument("--dfo", action="store_true", help="unboxed floats in float-typed positions")
    p.add_argument("--no-opt", dest="no_opt", action="append", default=[], choices=PASSES, metavar="PASS",
                   help=f"disable a pass ({', '.join(PASSES)}); repeatable")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="evgrad", description="Evidence-based gradual typing compiler and runtime.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="compile and execute one program")
    run.add_argument("file")
    _add_compile_flags(run)
    run.add_argument("--counters", action="store_true", help="print counters as JSON on stderr")
    run.add_argument("--emit", choices=STAGES, help="also dump a pipeline stage to stderr")
    run.add_argument("--input", default="", help="comma-separated integers consumed by read_int")
    run.add_argument("--max-depth", type=int, default=1_000_000)

    check = sub.add_parser("check", help="typecheck only")
    check.add_argument("file")
    check.add_argument("--typing", choices=("gradual", "static", "dynamic"), default="gradual")

    emit = sub.add_parser("emit", help="dump a pipeline stage")
    emit.add_argument("file")
    _add_compile_flags(emit)
    emit.add_argument("--emit", "--stage", dest="emit", choices=STAGES, default="core")

    dyn = sub.add_parser("dynamize", help="sample partially typed configurations")
    dyn.add_argument("file")
    dyn.add_argument("--samples-per-node", type=int, default=10)
    dyn.add_argument("--bins", type=int, default=10)
    dyn.add_argument("--seed", type=int, default=0)
    dyn.add_argument("--out-dir", required=True)

    bench = sub.add_parser("bench", help="run dynamized lattices and write CSV")
    bench.add_argument("targets", nargs="*", help="bundled benchmark names or a directory of .gtp files")
    bench.add_argument("--modes", default="g,mc,mv", help="comma-separated subset of g,mc,mv")
    bench.add_argument("--typing", choices=("gradual", "static", "dynamic"), default="gradual")
    bench.add_argument("--dfo", action="store_true")
    bench.add_argument("--no-opt", dest="no_opt", action="append", default=[], choices=PASSES, metavar="PASS")
    bench.add_argument("--reps", type=int, help="reps for sampled configs (endpoints get 5x); default 10/50")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--samples-per-node", type=int, default=10)
    bench.add_argument("--bins", type=int, default=10)
    bench.add_argument("--parallel", action="store_true", help="use worker processes (counter-only runs)")
    bench.add_argument("--out", default="results.csv")
    return p


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise SystemExit(_fail(f"cannot read {path}: {err.strerror}", EXIT_USAGE)) from None


def _fail(msg: str, code: int) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _inputs(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise SystemExit(_fail(f"--input expects integers, got {text!r}", EXIT_USAGE)) from None


def _options(args) -> CompileOptions:
    return CompileOptions(args.mode, args.typing, args.dfo, frozenset(args.no_opt))


def _cmd_run(args) -> int:
    from evgrad.runtime import Limits

    source = _read(args.file)
    try:
        compiled = compile_program(source, _options(args))
    except (ParseError, LexError, TypeCheckError) as err:
        return _fail(str(err), EXIT_STATIC)
    if args.emit:
        sys.stderr.write(compiled.emit(args.emit))
    result = run_compiled(compiled, Limits(max_depth=args.max_depth), _inputs(args.input))
    for line in result.output:
        print(line)
    if result.ok and result.value is not None:
        print(show_value(result.value))
    sys.stdout.flush()
    if args.counters:
        print(result.counters.to_json(), file=sys.stderr)
    if result.ok:
        return EXIT_OK
    return _fail(str(result.error), result.error.exit_code)


def _cmd_check(args) -> int:
    try:
        _, elab = front_end(_read(args.file), args.typing)
    except (ParseError, LexError, TypeCheckError) as err:
        return _fail(str(err), EXIT_STATIC)
    print(show_type(elab.main.ty))
    return EXIT_OK


def _cmd_emit(args) -> int:
    try:
        compiled = compile_program(_read(args.file), _options(args))
    except (ParseError, LexError, TypeCheckError) as err:
        return _fail(str(err), EXIT_STATIC)
    sys.stdout.write(compiled.emit(args.emit))
    return EXIT_OK


def _cmd_dynamize(args) -> int:
    try:
        program = parse_program(_read(args.file))
        samples = sample_lattice(program, args.samples_per_node, args.bins, args.seed)
    except (ParseError, LexError) as err:
        return _fail(str(err), EXIT_STATIC)
    except ConfigError as err:
        return _fail(str(err), EXIT_USAGE)
    manifest = write_configs(samples, args.out_dir, Path(args.file).stem)
    print(f"wrote {len(samples)} configurations to {manifest.parent}")
    return EXIT_OK


def _resolve(targets) -> list:
    if not targets:
        return B.suite()
    out = []
    for t in targets:
        if Path(t).is_dir():
            out.extend(B.load_dir(t))
        else:
            try:
                out.append(B.load(t))
            except KeyError as err:
                raise SystemExit(_fail(str(err.args[0]), EXIT_USAGE)) from None
    return out


def _cmd_bench(args) -> int:
    modes = tuple(m for m in args.modes.split(",") if m)
    bad = [m for m in modes if m not in MODES]
    if bad or not modes:
        return _fail(f"--modes must be a comma-separated subset of {','.join(MODES)}", EXIT_USAGE)
    try:
        records = run_benchmark_suite(
            _resolve(args.targets), modes, args.reps, args.seed, args.dfo, args.typing,
            tuple(args.no_opt), args.samples_per_node, args.bins, args.parallel,
        )
    except ConfigError as err:
        return _fail(str(err), EXIT_USAGE)
    path = emit_csv(records, args.out)
    print(f"wrote {len(records)} rows to {path}")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run, "check": _cmd_check, "emit": _cmd_emit, "dynamize": _cmd_dynamize, "bench": _cmd_bench,
}


def cli_main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE


def main() -> None:
    raise SystemExit(cli_main())
