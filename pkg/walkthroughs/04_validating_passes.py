"""
Co-simulation of passes
=======================

Each pass is checked per input by running the original and transformed
programs side by side.
"""

from collections import Counter
from importlib import resources

from rtlab import parse_program
from rtlab.gen import gen_random_program, main_arity, random_args
from rtlab.ir import print_program
from rtlab.passes import PASS_NAMES
from rtlab.passes.mutations import MUTANTS
from rtlab.validate import validate_pass

fac = parse_program(resources.files("rtlab").joinpath("demos", "fac.rtl").read_text())
res = validate_pass(fac, "tailrec", [5])
print(res.spec.kind.value, res.spec.policy.value)
print(res.verdict.to_report())

# %%
# A generated program, and every pass on it.

p = gen_random_program(42)
print(print_program(p))
args = random_args(42, main_arity(p))
for name in PASS_NAMES:
    print(f"{name:<11}", validate_pass(p, name, args, seed=42).verdict.reason)

# %%
# Seeded bugs.  Each one should be caught somewhere in a small corpus.

tally = Counter()
for seed in range(150):
    q = gen_random_program(seed)
    qargs = random_args(seed, main_arity(q))
    for mutant, (name, _) in MUTANTS.items():
        v = validate_pass(q, name, qargs, seed=seed, mutant=mutant).verdict
        tally[mutant, v.reason] += 1

for (mutant, reason), k in sorted(tally.items()):
    print(f"{mutant:<22} {reason:<18} {k}")
