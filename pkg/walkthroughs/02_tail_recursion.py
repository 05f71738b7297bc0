"""
Tail calls and tail recursion
=============================

Counting frames instead of timing code.
"""

from importlib import resources

from rtlab import PassConfig, apply_pipeline, parse_program, run
from rtlab.ir import print_function


def demo(name):
    return parse_program(resources.files("rtlab").joinpath("demos", name).read_text())


fac = demo("fac.rtl")
modes = {
    "plain": PassConfig(),
    "tailcalls": PassConfig(ftailcalls=True),
    "tailrec": PassConfig(ftailcalls=True, ftailrec=True),
}

print(f"{'n':>4} {'mode':<10} {'steps':>6} {'allocs':>6} {'live':>5}")
for n in (1, 10, 100):
    for label, cfg in modes.items():
        r = run(apply_pipeline(fac, cfg)[0], [n])
        print(f"{n:>4} {label:<10} {r.stats.steps:>6} {r.stats.allocs:>6} {r.stats.max_live_frames:>5}")

# %%
# After tail-recursion elimination the self call is a block of moves that
# jumps back to the entry node.  Arguments go through fresh $t temporaries
# first so that x and acc are read before either is overwritten.

looped, report = apply_pipeline(fac, modes["tailrec"])
print(print_function(looped["fac_rec"]))
print(report.to_kv())

# %%
# The list walk and quicksort behave the same way: the tail-position call
# stops costing a frame, the other recursive call in quicksort does not.

last = demo("last.rtl")
for label, cfg in modes.items():
    r = run(apply_pipeline(last, cfg)[0], [64])
    print("last", label, r.trace[-1], r.stats.max_live_frames)

qs = demo("quicksort.rtl")
for label, cfg in modes.items():
    r = run(apply_pipeline(qs, cfg)[0], [1, 64])
    print("quicksort", label, r.stats.allocs, r.stats.max_live_frames)
