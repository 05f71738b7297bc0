from importlib import resources

import pytest

from rtlab.ir import parse_program

DEMO_FILES = ("canary_demo.rtl", "cmp_demo.rtl", "fac.rtl", "last.rtl", "quicksort.rtl")


def demo_text(name):
    return resources.files("rtlab").joinpath("demos", name).read_text(encoding="utf-8")


def load_demo(name):
    return parse_program(demo_text(name))


@pytest.fixture
def fac():
    return load_demo("fac.rtl")


@pytest.fixture
def canary_demo():
    return load_demo("canary_demo.rtl")


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
