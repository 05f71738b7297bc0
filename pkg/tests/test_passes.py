import pytest
from hypothesis import given, settings, strategies as st

from rtlab.gen import gen_random_program, main_arity, random_args
from rtlab.ir import (
    Icall, Icond, Iop, Iretaa, Iretvia, Ireturn, Itailcall, Operation, check_wellformed, parse_program,
)
from rtlab.memory import Vint
from rtlab.passes import (
    CLI_DEFAULTS, PASS_NAMES, PassConfig, PassError, apply_pipeline, pass_canary, pass_lower_ra,
    pass_pac, pass_refine_div, pass_tailcall, pass_tailrec, peephole_retaa, run_pass, symexec_equiv,
)
from rtlab.passes.mutations import MUTANTS
from rtlab.semantics import Abort, StuckReason, run

from conftest import load_demo


def _fn(text):
    return parse_program(text, allow_reserved=True)


def _with(p, f):
    return p.replace_functions({**p.functions, f.name: f})


# -- tail calls ---------------------------------------------------------------


def test_tailcall_exposes_fac_rec(fac):
    f = pass_tailcall(fac["fac_rec"])
    assert f.code[5] == Itailcall("fac_rec", ("x1", "acc1"))


def test_tailcall_needs_empty_frame(fac):
    from dataclasses import replace
    f = replace(fac["fac_rec"], stacksize=16)
    assert pass_tailcall(f) is f


def test_call_feeding_add_is_not_a_tail_call():
    p = parse_program("""function main(x) stacksize 0 {
 1: r := call main(x) goto 2
 2: s := add r, x goto 3
 3: return s }""")
    assert pass_tailcall(p["main"]) == p["main"]


def test_tailrec_turns_fac_rec_into_loop(fac):
    f = pass_tailrec(pass_tailcall(fac["fac_rec"]))
    assert not any(isinstance(i, Itailcall) for i in f.code.values())
    assert f.entry in f.predecessors() and f.predecessors()[f.entry]
    p = _with(fac, f)
    assert check_wellformed(p) == []
    assert run(p, [10]).value == Vint(3628800)


def test_tailrec_moves_go_through_temporaries(fac):
    f0 = pass_tailcall(fac["fac_rec"])
    f = pass_tailrec(f0)
    new = sorted(set(f.code) - set(f0.code))
    moves = [f.code[n] for n in [5] + new]
    assert all(isinstance(i, Iop) and i.op.name == "move" for i in moves)
    dsts = [i.dst for i in moves]
    assert dsts[:2] == ["$t1", "$t2"] and dsts[2:] == ["x", "acc"]
    assert moves[-1].succ == f.entry


def test_tailrec_quicksort_second_call():
    p = load_demo("quicksort.rtl")
    f = pass_tailcall(p["twisted_quicksort"])
    selfs = [n for n, i in f.code.items() if isinstance(i, Itailcall) and i.callee == f.name]
    assert selfs
    g = pass_tailrec(f)
    assert not any(isinstance(i, Itailcall) and i.callee == g.name for i in g.code.values())
    assert any(isinstance(i, Icall) and i.callee == g.name for i in g.code.values())
    q = _with(p, g)
    assert run(q, [1, 20]).trace == run(p, [1, 20]).trace


def test_tailcall_to_other_function_untouched():
    p = parse_program("""function g(a) stacksize 0 { 1: return a }
function main(a) stacksize 0 { 1: tailcall g(a) }""")
    assert pass_tailrec(p["main"]) == p["main"]


def test_tailrec_of_zero_arity_self_call():
    p = parse_program("function main() stacksize 0 { 1: tailcall main() }")
    f = pass_tailrec(p["main"])
    assert check_wellformed(_with(p, f)) == []
    assert not any(isinstance(i, Itailcall) for i in f.code.values())


# -- canaries -----------------------------------------------------------------


def test_canary_aborts_overflow(canary_demo):
    p, spec = pass_canary(canary_demo, PassConfig(fstack_protector=True))
    r = run(p, [12])
    assert r.outcome == "Aborted"
    assert r.trace == [Abort("*** stack smashing detected ***: terminated")]
    assert spec["vulnerable"].canary_offset == 88 and spec["vulnerable"].new_stacksize == 96


@pytest.mark.parametrize("n", [0, 5, 10, 11])
def test_canary_benign_trace_unchanged(canary_demo, n):
    p, _ = pass_canary(canary_demo, PassConfig(fstack_protector=True))
    a, b = run(canary_demo, [n]), run(p, [n])
    assert a.trace == b.trace and a.value == b.value


def test_frameless_function_left_alone(canary_demo):
    p, spec = pass_canary(canary_demo, PassConfig(fstack_protector=True))
    assert p["last_index"] == canary_demo["last_index"]
    assert not spec["last_index"].protected
    q, spec = pass_canary(canary_demo, PassConfig(fstack_protector_all=True))
    assert spec["last_index"].protected and q["last_index"].stacksize == 8


def test_canary_guards_every_exit(canary_demo):
    p, spec = pass_canary(canary_demo, PassConfig(fstack_protector=True))
    f = p["vulnerable"]
    exits = [n for n, i in f.code.items() if isinstance(i, (Ireturn, Itailcall, Iretvia, Iretaa))]
    preds = f.predecessors()
    for n in exits:
        (b,) = preds[n]
        assert f.code[b].cond == "eq"


# -- return addresses ---------------------------------------------------------


def test_lowered_hijack_reaches_quack(canary_demo):
    p = pass_lower_ra(canary_demo)
    assert p["vulnerable"].ra_offset == 88
    r = run(p, [12])
    assert r.trace[-1].args == (666,)


def test_leaf_keeps_abstract_return(canary_demo):
    p = pass_lower_ra(canary_demo)
    assert p["last_index"] == canary_demo["last_index"]
    assert p["vulnerable"] != canary_demo["vulnerable"]


@pytest.mark.parametrize("n", [0, 4, 11])
def test_lowering_is_trace_transparent(canary_demo, n):
    lowered = pass_lower_ra(canary_demo)
    pac = pass_pac(lowered)
    for q in (lowered, pac):
        r = run(q, [n])
        assert r.trace == run(canary_demo, [n]).trace and r.outcome == "Final"


def test_pac_blocks_forged_code_address(canary_demo):
    p = pass_pac(pass_lower_ra(canary_demo))
    r = run(p, [12])
    assert r.outcome == "Stuck" and r.state.reason is StuckReason.BadReturnAddress


def test_pac_blocks_integer_garbage():
    # the call makes victim non-leaf, so its return address gets a slot at offset 8
    p2 = parse_program("""function victim() stacksize 8 {
 1: s := getsp goto 2
 2: k := const 1234 goto 3
 3: u := call noop() goto 4
 4: store s[8] := k goto 5
 5: return k }
function noop() stacksize 0 { 1: return }
function main() stacksize 0 {
 1: r := call victim() goto 2
 2: return r }""")
    assert run(p2).state.reason is StuckReason.MemFault
    r = run(pass_pac(pass_lower_ra(p2)))
    assert r.outcome == "Stuck" and r.state.reason is StuckReason.BadReturnAddress


def test_pac_requires_lowering():
    p = parse_program("""function noop() stacksize 0 { 1: return }
function main() stacksize 0 { 1: r := call noop() goto 2
 2: return r }""")
    with pytest.raises(PassError):
        pass_pac(p)


# -- peephole -----------------------------------------------------------------


def _epilogue(decode_mod="s"):
    return _fn(f"""function main() stacksize 8 raslot 0 {{
 1: ra := getra goto 2
 2: s := getsp goto 3
 3: e := pac_encode ra, s goto 4
 4: store s[0] := e goto 5
 5: v := const 1 goto 6
 6: s1 := getsp goto 7
 7: rr := load s1[0] goto 8
 8: s2 := getsp goto 9
 9: rr := pac_decode rr, {decode_mod} goto 10
 10: retvia rr, v }}""")


def test_standard_epilogue_fuses():
    f = peephole_retaa(_epilogue()["main"])
    assert f.code[9] == Iretaa("rr", "v") and 10 not in f.code
    assert run(_with(_epilogue(), f)).value == Vint(1)


def test_decoded_value_used_elsewhere_blocks_fusion():
    p = _fn("""function main() stacksize 8 raslot 0 {
 1: ra := getra goto 2
 2: s := getsp goto 3
 3: e := pac_encode ra, s goto 4
 4: store s[0] := e goto 5
 5: rr := load s[0] goto 6
 6: dd := pac_decode rr, s goto 7
 7: u := extcall print_int(dd) goto 8
 8: retvia dd, u }""")
    assert peephole_retaa(p["main"]) == p["main"]


def test_mismatched_modifier_blocks_fusion():
    p = _epilogue(decode_mod="v")
    assert peephole_retaa(p["main"]) == p["main"]


def test_symexec_examples():
    decode = Iop(Operation("pac_decode"), ("rr", "sp0"), "rr", 2)
    getsp = Iop(Operation("getsp"), (), "sp0", 1)
    assert symexec_equiv([getsp, decode, Iretvia("rr", "v")], [getsp, Iretaa("rr", "v")])
    assert not symexec_equiv([Iretvia("rr", "v")], [Iretaa("rr", "v")])
    seq = [getsp, decode, Iretvia("rr", "v")]
    assert symexec_equiv(seq, list(seq))
    assert not symexec_equiv([getsp, Iop(Operation("pac_decode"), ("rr", "sp0"), "dd", 2), Iretvia("dd")],
                             [getsp, Iretaa("rr")])


def test_symexec_rejects_non_straight_line():
    assert not symexec_equiv([Icond("eq", ("a", "b"), 1, 2), Ireturn()], [Ireturn()])
    assert not symexec_equiv([], [])


# -- refine_div and pipeline --------------------------------------------------


def test_refine_div_replaces_only_divisions():
    p = parse_program("""function main(a) stacksize 0 {
 1: z := const 0 goto 2
 2: q := div_strict a, z goto 3
 3: u := extcall print_int(a) goto 4
 4: return q }""")
    q = pass_refine_div(p)
    assert q["main"].code[2].op.name == "div_total"
    assert {n: i for n, i in q["main"].code.items() if n != 2} == \
        {n: i for n, i in p["main"].code.items() if n != 2}
    before, after = run(p, [3]), run(q, [3])
    assert before.state.reason is StuckReason.DivideError
    assert after.outcome == "Final" and after.trace[:len(before.trace)] == before.trace


def test_refine_div_without_divisions_is_identity(fac):
    assert pass_refine_div(fac) == fac


def test_all_off_pipeline_only_refines(fac):
    p, report = apply_pipeline(fac, PassConfig())
    assert p == pass_refine_div(fac)
    assert report.passes_run == ["refine_div"]


def test_fac_pipeline_removes_self_call(fac):
    p, report = apply_pipeline(fac, PassConfig(ftailcalls=True, ftailrec=True))
    assert not any(isinstance(i, (Icall, Itailcall)) and i.callee == "fac_rec"
                   for i in p["fac_rec"].code.values())
    assert report.count("fac_rec", "tailrec") == 1
    assert "fac_rec tailrec 1" in report.to_kv().splitlines()


def test_canary_and_ra_slots_are_disjoint(canary_demo):
    p, report = apply_pipeline(canary_demo, CLI_DEFAULTS)
    e = report.canary["vulnerable"]
    ra = p["vulnerable"].ra_offset
    assert e.protected and ra is not None
    assert {e.canary_offset, ra} == {88, 96} and ra > e.canary_offset
    assert p["vulnerable"].stacksize == 104
    assert "canary vulnerable: slot 88, frame 96" in report.to_table()


def test_protector_all_implies_protector():
    assert PassConfig(fstack_protector_all=True).normalized().fstack_protector


def test_unknown_pass():
    with pytest.raises(PassError):
        run_pass(load_demo("fac.rtl"), "inline")


def test_every_mutant_targets_a_real_pass():
    assert {t for t, _ in MUTANTS.values()} <= set(PASS_NAMES)
    assert len(MUTANTS) == 5


# -- properties over generated programs ---------------------------------------


ALL = PassConfig(ftailcalls=True, ftailrec=True, fstack_protector=True, fretaddr_pac=True, fretaa=True)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_passes_preserve_wellformedness(seed):
    p = gen_random_program(seed)
    for name in PASS_NAMES:
        p = run_pass(p, name, ALL).program
        assert check_wellformed(p) == [], name
    apply_pipeline(gen_random_program(seed), ALL, check=True)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_tailrec_leaves_no_self_tailcall(seed):
    p = run_pass(run_pass(gen_random_program(seed), "tailcall").program, "tailrec").program
    for f in p.functions.values():
        assert not any(isinstance(i, Itailcall) and i.callee == f.name for i in f.code.values())


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_canary_never_fires_on_normal_runs(seed):
    p = gen_random_program(seed)
    args = random_args(seed, main_arity(p))
    if run(p, args, fuel=200_000).outcome != "Final":
        return
    q, _ = apply_pipeline(p, PassConfig(fstack_protector_all=True))
    r = run(q, args, fuel=400_000)
    assert r.outcome == "Final" and not any(isinstance(e, Abort) for e in r.trace)


@pytest.mark.parametrize("n", [1, 5, 20, 60])
def test_tailrec_frame_economy(fac, n):
    plain = run(apply_pipeline(fac, PassConfig())[0], [n])
    looped = run(apply_pipeline(fac, PassConfig(ftailcalls=True, ftailrec=True))[0], [n])
    assert plain.stats.max_live_frames == n + 2
    assert looped.stats.max_live_frames == 1 and looped.stats.allocs == 2
