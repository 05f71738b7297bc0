"""
Authenticated return addresses
==============================

Saving the return address in the frame, signing it, and fusing the check
into the return.
"""

from importlib import resources

from rtlab import parse_program, run
from rtlab.ir import Iop, Iretaa, Iretvia, Operation, print_function
from rtlab.passes import pass_lower_ra, pass_pac, peephole_retaa, symexec_equiv

prog = parse_program(resources.files("rtlab").joinpath("demos", "canary_demo.rtl").read_text())

lowered = pass_lower_ra(prog)
signed = pass_pac(lowered)
fused = signed.replace_functions({n: peephole_retaa(f) for n, f in signed.functions.items()})

# the overflowing store now hits the saved return address; the array is
# filled with the address of main's quack block
for label, p in [("abstract", prog), ("lowered", lowered), ("signed", signed), ("fused", fused)]:
    r = run(p, [12])
    print(f"{label:<9} {r.outcome:<6} {[str(e) for e in r.trace]} {r.state if r.outcome == 'Stuck' else ''}")

print(print_function(fused["vulnerable"]))

# %%
# The fusion is licensed by symbolic execution of the epilogue.  A return
# through the raw register is not the same thing as an authenticated return.

getsp = Iop(Operation("getsp"), (), "s", 2)
decode = Iop(Operation("pac_decode"), ("rr", "s"), "rr", 3)
print(symexec_equiv([getsp, decode, Iretvia("rr", "v")], [getsp, Iretaa("rr", "v")]))
print(symexec_equiv([getsp, Iretvia("rr", "v")], [getsp, Iretaa("rr", "v")]))
