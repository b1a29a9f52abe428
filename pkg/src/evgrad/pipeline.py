"""Compiler driver: source text to a runnable core program."""

from __future__ import annotations

from dataclasses import dataclass, field

from evgrad import checker as C
from evgrad import midend as M
from evgrad import surface as S
from evgrad.runtime import Limits, Mode, RunResult, run_program

PASSES = ("simplify", "germs", "prune", "direct")
STAGES = ("ast", "elab", "anf", "core")


class StaticModeViolation(AssertionError):
    """A typing=static run executed a runtime type check."""


@dataclass(frozen=True)
class CompileOptions:
    mode: str = "g"
    typing: str = "gradual"
    dfo: bool = False
    disabled: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "disabled", frozenset(self.disabled))
        unknown = self.disabled - set(PASSES)
        if unknown:
            raise ValueError(f"unknown pass(es): {', '.join(sorted(unknown))}")
        Mode(self.mode, self.dfo, self.typing)

    @property
    def runtime_mode(self) -> Mode:
        return Mode(self.mode, self.dfo, self.typing)


@dataclass
class Compiled:
    ast: S.Program
    elab: C.ElabProgram
    anf: M.CoreProgram
    core: M.CoreProgram
    options: CompileOptions

    def emit(self, stage: str) -> str:
        if stage == "ast":
            return S.pretty(self.ast)
        if stage == "elab":
            return C.show_elab(self.elab) + "\n"
        if stage == "anf":
            return M.show_core(self.anf) + "\n"
        if stage == "core":
            return M.show_core(self.core) + "\n"
        raise ValueError(f"unknown stage {stage!r}")


def front_end(source, typing: str = "gradual") -> tuple[S.Program, C.ElabProgram]:
    """Parse (if needed) and typecheck. Raises ParseError, LexError or TypeCheckError."""
    program = S.parse_program(source) if isinstance(source, str) else source
    if typing == "dynamic":
        program = S.erase_annotations(program)
    elab = C.typecheck(program)
    if typing == "static" and C.mentions_dyn(elab):
        raise C.TypeCheckError("typing=static rejects programs that mention ?")
    return program, elab


def compile_program(source, options: CompileOptions = CompileOptions()) -> Compiled:
    """Run every stage. `source` is program text or a parsed Program."""
    ast, typed = front_end(source, options.typing)
    elab = C.elaborate_static(typed)
    if "simplify" not in options.disabled:
        elab = C.simplify_ascriptions(elab, dfo=options.dfo)
    anf = M.to_anf(M.alpha_rename(elab))
    core = M.elaborate_dynamic(anf)
    if "germs" not in options.disabled:
        core = M.specialize_germs(core)
    if "prune" not in options.disabled:
        core = M.prune_dynamic_ascriptions(core, options.mode)
    core = M.closure_convert(core, direct="direct" not in options.disabled)
    return Compiled(ast, elab, anf, core, options)


def run_compiled(compiled: Compiled, limits: Limits = Limits(), inputs=()) -> RunResult:
    options = compiled.options
    result = run_program(compiled.core, options.runtime_mode, limits, inputs)
    if options.typing == "static":
        c = result.counters
        if c.trans_ops or c.germ_checks or c.proxy_allocs:
            raise StaticModeViolation(f"runtime checks under typing=static: {c.to_json()}")
    return result


def run_source(source, options: CompileOptions = CompileOptions(), limits: Limits = Limits(), inputs=()) -> RunResult:
    """Compile and run. Static errors propagate as exceptions; runtime errors land in the result."""
    return run_compiled(compile_program(source, options), limits, inputs)
