import pytest

from rtlab.cli import main, split_flags
from rtlab.passes import CLI_DEFAULTS, PassConfig

from conftest import demo_text


@pytest.fixture
def demo_path(tmp_path):
    def write(name):
        path = tmp_path / name
        path.write_text(demo_text(name))
        return str(path)
    return write


def test_flags_fold_in_order():
    cfg, rest = split_flags(["run", "-fno-tailrec", "x.rtl", "-ftailrec", "--args", "1"], PassConfig())
    assert cfg == PassConfig(ftailrec=True)
    assert rest == ["run", "x.rtl", "--args", "1"]
    cfg, _ = split_flags(["-fno-retaddr-pac", "-fretaa"])
    assert not cfg.fretaddr_pac and cfg.fretaa


def test_protector_flags_move_together():
    cfg, _ = split_flags(["-fstack-protector-all"], PassConfig())
    assert cfg.fstack_protector and cfg.fstack_protector_all
    cfg, _ = split_flags(["-fstack-protector-all", "-fno-stack-protector"], PassConfig())
    assert not cfg.fstack_protector and not cfg.fstack_protector_all


def test_defaults():
    assert split_flags([])[0] == CLI_DEFAULTS


def test_run_unprotected_overflow_is_stuck(demo_path, capsys):
    assert main(["run", demo_path("canary_demo.rtl"), "--args", "12", "-fno-stack-protector"]) == 2


def test_run_protected_overflow_aborts(demo_path, capsys):
    code = main(["run", demo_path("canary_demo.rtl"), "--args", "12", "-fstack-protector"])
    out = capsys.readouterr().out
    assert code == 3
    assert "abort: *** stack smashing detected ***: terminated\n" in out


def test_run_benign(demo_path, capsys):
    assert main(["run", demo_path("canary_demo.rtl"), "--args", "11"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("extcall print_int(1)\nresult: Final 0\n")


def test_run_kv_format(demo_path, capsys):
    assert main(["run", demo_path("fac.rtl"), "--args", "10", "--format", "kv"]) == 0
    kv = dict(line.split("=", 1) for line in capsys.readouterr().out.splitlines())
    assert kv["outcome"] == "Final" and kv["value"] == "3628800"
    assert set(kv) == {"outcome", "value", "steps", "allocs", "frees", "max_live_frames", "events"}


def test_out_of_fuel_exit(demo_path, capsys):
    assert main(["run", demo_path("quicksort.rtl"), "--args", "1", "40", "--fuel", "10"]) == 4


def test_validate_fac_tailrec(demo_path, capsys):
    assert main(["validate", demo_path("fac.rtl"), "--pass", "tailrec"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "accepted"


def test_validate_mutant_rejected(demo_path, capsys):
    code = main(["validate", demo_path("canary_demo.rtl"), "--pass", "canary", "--args", "3",
                 "--mutant", "canary_wrong_offset", "--format", "kv"])
    out = capsys.readouterr().out
    assert code == 1 and "accepted=false" in out and "reason=RelationViolation" in out


def test_transform_prints_ir_and_report(demo_path, capsys):
    assert main(["transform", demo_path("fac.rtl"), "--format", "kv"]) == 0
    out = capsys.readouterr().out
    assert "function fac_rec(x, acc)" in out and "fac_rec tailrec 1" in out


@pytest.mark.parametrize("name", ["canary-attack", "pac-attack", "hijack", "fac", "last", "quicksort", "cmp"])
def test_demos_run(name, capsys):
    assert main(["demo", name]) == 0
    assert capsys.readouterr().out.startswith(f"demo {name} ")


def test_corpus_small(capsys):
    assert main(["corpus", "--count", "5", "--passes", "tailcall,canary"]) == 0
    out = capsys.readouterr().out
    assert "tailcall" in out and "canary" in out


def test_corpus_mutant_found(capsys):
    assert main(["corpus", "--count", "30", "--mutant", "canary_skip_check", "--format", "kv"]) == 0
    assert "canary.rejected=0" not in capsys.readouterr().out


@pytest.mark.parametrize("argv", [[], ["run"], ["frob"], ["run", "x.rtl", "-fbogus"],
                                  ["validate", "x.rtl", "--pass", "inline"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == 64


def test_missing_file(capsys):
    assert main(["run", "/nonexistent/p.rtl"]) == 64


def test_malformed_input(tmp_path, capsys):
    bad = tmp_path / "bad.rtl"
    bad.write_text("function main() stacksize 12 { 1: return }")
    assert main(["run", str(bad)]) == 65
    bad.write_text("function main( {")
    assert main(["run", str(bad)]) == 65
