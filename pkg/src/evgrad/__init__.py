"""Evidence-based gradual typing: compiler pipeline, instrumented runtime and lattice tools."""

from evgrad.typelattice import (
    BOOL, DYN, FLOAT, INT, UNIT,
    Base, Dyn, Fun, GradualType, Named, Ref, Tuple, Vec, VariantEnv,
    consistent, germ_of, meet, precision_le, type_node_count,
)
from evgrad.evidence import Evidence, cod, content, dfo_trans, dom, initial_evidence, is_fully_precise, trans
from evgrad.surface import LexError, ParseError, parse_program, parse_type, pretty, tokenize
from evgrad.checker import TypeCheckError, elaborate_static, simplify_ascriptions, typecheck
from evgrad.runtime import CastError, GermError, RuntimeFault, RunResult, run_program
from evgrad.pipeline import CompileOptions, compile_program, run_source
from evgrad.dynamizer import ConfigError, ConfigSample, enumerate_annotation_sites, less_precise_variants, sample_lattice

__all__ = [
    "BOOL", "DYN", "FLOAT", "INT", "UNIT",
    "Base", "Dyn", "Fun", "GradualType", "Named", "Ref", "Tuple", "Vec", "VariantEnv",
    "consistent", "germ_of", "meet", "precision_le", "type_node_count",
    "Evidence", "cod", "content", "dfo_trans", "dom", "initial_evidence", "is_fully_precise", "trans",
    "LexError", "ParseError", "parse_program", "parse_type", "pretty", "tokenize",
    "TypeCheckError", "elaborate_static", "simplify_ascriptions", "typecheck",
    "CastError", "GermError", "RuntimeFault", "RunResult", "run_program",
    "CompileOptions", "compile_program", "run_source",
    "ConfigError", "ConfigSample", "enumerate_annotation_sites", "less_precise_variants", "sample_lattice",
]
