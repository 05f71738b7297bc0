"""Fixed-order pass pipeline and its rewrite report."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from ..ir import Program, check_wellformed
from ..relations import CanarySpec
from .basic import refine_div_counted, tailcall_counted, tailrec_counted
from .canary import canary_counted
from .config import PassConfig, PassError
from .peephole import peephole_counted
from .retaddr import lower_ra_counted, pac_counted

PASS_NAMES = ("refine_div", "tailcall", "tailrec", "canary", "lower_ra", "pac", "peephole")

# passes whose input must already have been through other passes
PREREQUISITES: Dict[str, Tuple[str, ...]] = {
    "tailrec": ("tailcall",),
    "pac": ("lower_ra",),
    "peephole": ("lower_ra", "pac"),
}


@dataclass
class PassOutput:
    program: Program
    counts: Dict[str, int]
    canary: Optional[CanarySpec] = None


def _per_function(fn: Callable) -> Callable[[Program, PassConfig], PassOutput]:
    def run(p: Program, cfg: PassConfig) -> PassOutput:
        funcs, counts = {}, {}
        for name, f in p.functions.items():
            funcs[name], counts[name] = fn(f)
        return PassOutput(p.replace_functions(funcs), counts)
    return run


def _canary(p: Program, cfg: PassConfig) -> PassOutput:
    out, spec, counts = canary_counted(p, cfg)
    return PassOutput(out, counts, spec)


PASSES: Dict[str, Callable[[Program, PassConfig], PassOutput]] = {
    "refine_div": lambda p, cfg: PassOutput(*refine_div_counted(p)),
    "tailcall": _per_function(tailcall_counted),
    "tailrec": _per_function(tailrec_counted),
    "canary": _canary,
    "lower_ra": lambda p, cfg: PassOutput(*lower_ra_counted(p)),
    "pac": lambda p, cfg: PassOutput(*pac_counted(p)),
    "peephole": _per_function(peephole_counted),
}


def run_pass(p: Program, name: str, cfg: Optional[PassConfig] = None) -> PassOutput:
    if name not in PASSES:
        raise PassError(f"unknown pass {name!r}; expected one of {', '.join(PASS_NAMES)}")
    return PASSES[name](p, cfg or PassConfig())


def prepare_pass(p: Program, name: str, cfg: Optional[PassConfig] = None) -> Tuple[Program, PassOutput]:
    """Apply the prerequisites of ``name``, then ``name`` itself: ``(input, output)``."""
    for pre in PREREQUISITES.get(name, ()):
        p = run_pass(p, pre, cfg).program
    return p, run_pass(p, name, cfg)


@dataclass
class PipelineReport:
    rows: List[Tuple[str, str, int]] = field(default_factory=list)
    canary: Optional[CanarySpec] = None
    passes_run: List[str] = field(default_factory=list)

    def count(self, function: str, pass_name: str) -> int:
        return sum(c for f, p, c in self.rows if f == function and p == pass_name)

    def to_kv(self) -> str:
        return "".join(f"{f} {p} {c}\n" for f, p, c in self.rows)

    def to_table(self) -> str:
        if not self.rows:
            return "no passes run\n"
        w = max(8, max(len(f) for f, _, _ in self.rows))
        lines = [f"{'function':<{w}}  {'pass':<10}  rewrites", f"{'-' * w}  {'-' * 10}  --------"]
        lines += [f"{f:<{w}}  {p:<10}  {c:>8}" for f, p, c in self.rows]
        if self.canary is not None:
            for f, e in sorted(self.canary.protected().items()):
                lines.append(f"canary {f}: slot {e.canary_offset}, frame {e.new_stacksize}")
        return "\n".join(lines) + "\n"


def apply_pipeline(p: Program, cfg: PassConfig, *, check: bool = False) -> Tuple[Program, PipelineReport]:
    """Run the enabled passes in their fixed order.

    With ``check`` the program is re-checked for well-formedness after each
    pass and a :class:`PassError` names the offending pass.
    """
    cfg = cfg.normalized()
    enabled = ["refine_div"]
    if cfg.ftailcalls:
        enabled.append("tailcall")
    if cfg.ftailrec:
        enabled.append("tailrec")
    if cfg.fstack_protector:
        enabled.append("canary")
    if cfg.fretaddr_pac:
        enabled += ["lower_ra", "pac"]
    if cfg.fretaa:
        enabled.append("peephole")
    report = PipelineReport()
    for name in enabled:
        out = run_pass(p, name, cfg)
        p = out.program
        report.passes_run.append(name)
        report.rows += [(f, name, c) for f, c in out.counts.items()]
        if out.canary is not None:
            report.canary = out.canary
        if check:
            diags = check_wellformed(p)
            if diags:
                raise PassError(f"{name} broke well-formedness: {diags[0]}")
    return p, report
