"""A small RTL compiler laboratory: IR, interpreter, security passes and a co-simulation validator."""
from .ir import Program, Function, parse_program, print_program, check_wellformed
from .memory import VUNDEF, Vint, Vptr, Vcode, Venc, Memory
from .passes import PassConfig, apply_pipeline
from .semantics import run
from .validate import MatchSpec, Verdict, cosim_run, validate_pass

__version__ = "0.1.0"

__all__ = [
    "Function", "MatchSpec", "Memory", "PassConfig", "Program", "VUNDEF", "Vcode", "Venc",
    "Verdict", "Vint", "Vptr", "apply_pipeline", "check_wellformed", "cosim_run",
    "parse_program", "print_program", "run", "validate_pass",
]
