"""Program transformations over the RTL IR."""
from .basic import pass_refine_div, pass_tailcall, pass_tailrec
from .canary import pass_canary
from .config import CLI_DEFAULTS, PassConfig, PassError
from .peephole import peephole_retaa, symexec_equiv
from .pipeline import (
    PASS_NAMES, PREREQUISITES, PipelineReport, apply_pipeline, prepare_pass, run_pass,
)
from .retaddr import pass_lower_ra, pass_pac

__all__ = [
    "CLI_DEFAULTS", "PASS_NAMES", "PREREQUISITES", "PassConfig", "PassError",
    "PipelineReport", "apply_pipeline", "pass_canary", "pass_lower_ra", "pass_pac",
    "pass_refine_div", "pass_tailcall", "pass_tailrec", "peephole_retaa",
    "prepare_pass", "run_pass", "symexec_equiv",
]
