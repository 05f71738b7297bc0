"""
Stack smashing and canaries
===========================

An out-of-bounds write one word past a frame, run three ways.
"""

from importlib import resources

from rtlab import PassConfig, apply_pipeline, parse_program, run
from rtlab.ir import print_function

src = resources.files("rtlab").joinpath("demos", "canary_demo.rtl").read_text()
prog = parse_program(src)

# vulnerable() keeps an index at offset 0 and ten words of array after it
print(print_function(prog["vulnerable"]))

# n = 11 stays in bounds, n = 12 writes the word just past the frame
for n in (11, 12):
    r = run(prog, [n])
    print(n, r.outcome, r.state if r.outcome == "Stuck" else [str(e) for e in r.trace])

# %%
# With a canary the frame grows by one word and the overflow lands on it.

protected, report = apply_pipeline(prog, PassConfig(fstack_protector=True))
print(report.to_table())
for n in (11, 12):
    r = run(protected, [n])
    print(n, r.outcome, [str(e) for e in r.trace])

# the canary is derived from a seed, so a different seed changes the secret
# but never the observable behaviour
print({seed: run(protected, [12], canary_seed=seed).outcome for seed in range(4)})

# %%
# Functions without frame data are left alone unless every function is protected.

spec = apply_pipeline(prog, PassConfig(fstack_protector=True))[1].canary
spec_all = apply_pipeline(prog, PassConfig(fstack_protector_all=True))[1].canary
for name in prog.functions:
    print(f"{name:<12} default={spec[name].protected!s:<6} all={spec_all[name].protected}")
