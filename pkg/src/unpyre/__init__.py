"""Multi-version CPython bytecode decompiler.

Reconstructs semantically equivalent source from compiled code objects of
CPython 3.8 through 3.11, including program-generated bytecode, by
symbolically executing the evaluation stack and re-structuring the control
flow graph.
"""

from .code_model import CodeObject, Const, VersionTag, flatten_nested_codes, \
    validate_code_object
from .emitter import EmitStyle, emit_expression, emit_module, render_constant
from .errors import UnpyreError
from .pipeline import decompile_body, decompile_source, function_tree, module_tree
from .pyc import load_json_dump, load_pyc, parse_marshal, parse_pyc_header

__all__ = [
    "CodeObject",
    "Const",
    "EmitStyle",
    "UnpyreError",
    "VersionTag",
    "decompile_body",
    "decompile_source",
    "emit_expression",
    "emit_module",
    "flatten_nested_codes",
    "function_tree",
    "load_json_dump",
    "load_pyc",
    "module_tree",
    "parse_marshal",
    "parse_pyc_header",
    "render_constant",
    "validate_code_object",
]

__version__ = "0.1.0"
