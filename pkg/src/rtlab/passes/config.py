from __future__ import annotations

from dataclasses import dataclass, replace


class PassError(Exception):
    """A pass was applied to a program that does not meet its precondition."""


@dataclass(frozen=True)
class PassConfig:
    """Which transformations the pipeline runs.

    The library default is everything off; the command line turns on the
    usual set (see :data:`CLI_DEFAULTS`).
    """

    ftailcalls: bool = False
    ftailrec: bool = False
    fstack_protector: bool = False
    fstack_protector_all: bool = False
    fretaddr_pac: bool = False
    fretaa: bool = False

    def normalized(self) -> "PassConfig":
        # protecting every function implies protecting the vulnerable ones
        if self.fstack_protector_all and not self.fstack_protector:
            return replace(self, fstack_protector=True)
        return self

    @classmethod
    def all_on(cls) -> "PassConfig":
        return cls(True, True, True, True, True, True)


CLI_DEFAULTS = PassConfig(ftailcalls=True, ftailrec=True, fstack_protector=True,
                          fretaddr_pac=True)
