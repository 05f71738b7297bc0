"""RTL-style intermediate representation.

A function is a control-flow graph: a map from positive node ids to
instructions, each naming its successors explicitly.  Registers are
pseudo-registers identified by name.

Textual syntax (``.rtl`` files)::

    # comment
    function fac_rec(x, acc) stacksize 0 {
      1: one := const 1 goto 2
      2: if ge x, one goto 3 else 6
      3: x1 := sub x, one goto 4
      4: a1 := mul x, acc goto 5
      5: r := call fac_rec(x1, a1) goto 7
      6: return acc
      7: return r
    }
    main fac_rec

``entry N`` and ``raslot N`` may follow ``stacksize``; a missing ``entry``
means the smallest node id.  A missing ``main`` directive means ``main``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple, Union

Reg = str
Node = int

BUILTINS: Dict[str, int] = {"print_int": 1, "stack_chk_fail": 0}

OPCODES: Dict[str, int] = {
    "const": 0,
    "getcanary": 0,
    "getra": 0,
    "getsp": 0,
    "codeaddr": 0,
    "move": 1,
    "add": 2,
    "sub": 2,
    "mul": 2,
    "div_strict": 2,
    "div_total": 2,
    "addptr": 2,
    "cmp_eq": 2,
    "cmp_lt": 2,
    "pac_encode": 2,
    "pac_decode": 2,
}

CONDITIONS = ("eq", "lt", "ge", "ne")

RESERVED_PREFIX = "$t"

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


@dataclass(frozen=True, slots=True)
class Operation:
    """An opcode plus its immediate: ``imm`` for const, ``target`` for codeaddr."""

    name: str
    imm: Optional[int] = None
    target: Optional[Tuple[str, Node]] = None

    def __str__(self) -> str:
        if self.name == "const":
            return f"const {self.imm}"
        if self.name == "codeaddr":
            f, n = self.target
            return f"codeaddr {f}.{n}"
        return self.name


@dataclass(frozen=True, slots=True)
class Iop:
    op: Operation
    args: Tuple[Reg, ...]
    dst: Reg
    succ: Node


@dataclass(frozen=True, slots=True)
class Iload:
    addr: Reg
    off: int
    dst: Reg
    succ: Node


@dataclass(frozen=True, slots=True)
class Istore:
    addr: Reg
    off: int
    src: Reg
    succ: Node


@dataclass(frozen=True, slots=True)
class Icall:
    callee: str
    args: Tuple[Reg, ...]
    dst: Reg
    succ: Node


@dataclass(frozen=True, slots=True)
class Itailcall:
    callee: str
    args: Tuple[Reg, ...]


@dataclass(frozen=True, slots=True)
class Icond:
    cond: str
    args: Tuple[Reg, Reg]
    if_true: Node
    if_false: Node


@dataclass(frozen=True, slots=True)
class Ijumptable:
    index: Reg
    targets: Tuple[Node, ...]


@dataclass(frozen=True, slots=True)
class Ireturn:
    src: Optional[Reg] = None


@dataclass(frozen=True, slots=True)
class Iretvia:
    """Return through the code address held in ``src``; ``val`` is the result."""

    src: Reg
    val: Optional[Reg] = None


@dataclass(frozen=True, slots=True)
class Iretaa:
    """Authenticate ``src`` against the stack pointer, then return through it."""

    src: Reg
    val: Optional[Reg] = None


@dataclass(frozen=True, slots=True)
class Iextcall:
    name: str
    args: Tuple[Reg, ...]
    dst: Reg
    succ: Node


Instr = Union[Iop, Iload, Istore, Icall, Itailcall, Icond, Ijumptable,
              Ireturn, Iretvia, Iretaa, Iextcall]

RETURN_CLASS = (Ireturn, Iretvia, Iretaa)
STRAIGHT_LINE = (Iop, Iload, Istore, Icall, Iextcall)


def successors(i: Instr) -> Tuple[Node, ...]:
    if isinstance(i, STRAIGHT_LINE):
        return (i.succ,)
    if isinstance(i, Icond):
        return (i.if_true, i.if_false)
    if isinstance(i, Ijumptable):
        return i.targets
    return ()


def uses(i: Instr) -> Tuple[Reg, ...]:
    """Registers read by an instruction."""
    if isinstance(i, (Iop, Icall, Itailcall, Iextcall, Icond)):
        return tuple(i.args)
    if isinstance(i, Iload):
        return (i.addr,)
    if isinstance(i, Istore):
        return (i.addr, i.src)
    if isinstance(i, Ijumptable):
        return (i.index,)
    if isinstance(i, Ireturn):
        return (i.src,) if i.src else ()
    if isinstance(i, (Iretvia, Iretaa)):
        return (i.src,) + ((i.val,) if i.val else ())
    return ()


def defs(i: Instr) -> Tuple[Reg, ...]:
    if isinstance(i, (Iop, Iload, Icall, Iextcall)):
        return (i.dst,)
    return ()


def with_succ(i: Instr, succ: Node) -> Instr:
    """Copy of a straight-line instruction with a new successor."""
    from dataclasses import replace
    return replace(i, succ=succ)


@dataclass(frozen=True)
class Function:
    name: str
    params: Tuple[Reg, ...]
    stacksize: int
    entry: Node
    code: Dict[Node, Instr] = field(hash=False)
    ra_offset: Optional[int] = None

    def registers(self) -> set:
        regs = set(self.params)
        for i in self.code.values():
            regs.update(uses(i))
            regs.update(defs(i))
        return regs

    def predecessors(self) -> Dict[Node, List[Node]]:
        preds: Dict[Node, List[Node]] = {n: [] for n in self.code}
        for n in sorted(self.code):
            for s in successors(self.code[n]):
                preds.setdefault(s, []).append(n)
        return preds

    def max_node(self) -> Node:
        return max(self.code) if self.code else 0


@dataclass(frozen=True)
class Program:
    functions: Dict[str, Function] = field(hash=False)
    main: str = "main"

    def __getitem__(self, name: str) -> Function:
        return self.functions[name]

    def replace_functions(self, funcs: Dict[str, Function]) -> "Program":
        return Program(dict(funcs), self.main)


# -- well-formedness ----------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Diagnostic:
    function: Optional[str]
    node: Optional[Node]
    rule: str
    message: str

    def __str__(self) -> str:
        where = self.function or "<program>"
        if self.node is not None:
            where += f":{self.node}"
        return f"{where}: {self.rule}: {self.message}"


class WellformedError(ValueError):
    def __init__(self, diagnostics: List[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


def _valid_reg(r: str) -> bool:
    if r.startswith(RESERVED_PREFIX):
        return r[len(RESERVED_PREFIX):].isdigit()
    return bool(_IDENT.match(r))


def check_wellformed(p: Program) -> List[Diagnostic]:
    """Return every violated structural invariant; empty means well-formed."""
    out: List[Diagnostic] = []

    def diag(f, n, rule, msg):
        out.append(Diagnostic(f, n, rule, msg))

    if p.main not in p.functions:
        diag(None, None, "MissingMain", f"main function {p.main!r} is not defined")
    for fname, f in p.functions.items():
        if fname != f.name:
            diag(fname, None, "NameMismatch", f"function stored under {fname!r} is named {f.name!r}")
        if not _IDENT.match(f.name):
            diag(fname, None, "BadName", f"invalid function name {f.name!r}")
        if len(set(f.params)) != len(f.params):
            diag(fname, None, "DuplicateParam", f"parameters {f.params} are not distinct")
        for r in f.params:
            if not _valid_reg(r):
                diag(fname, None, "BadName", f"invalid register name {r!r}")
        if f.stacksize < 0 or f.stacksize % 8:
            diag(fname, None, "Alignment", f"stacksize {f.stacksize} is not a non-negative multiple of 8")
        if f.ra_offset is not None and (f.ra_offset % 8 or not 0 <= f.ra_offset <= f.stacksize - 8):
            diag(fname, None, "Alignment", f"raslot {f.ra_offset} is not an aligned slot of the frame")
        if f.entry not in f.code:
            diag(fname, None, "MissingEntry", f"entry node {f.entry} has no instruction")
        for n in sorted(f.code):
            i = f.code[n]
            if n <= 0:
                diag(fname, n, "BadNodeId", "node ids must be positive")
            for s in successors(i):
                if s not in f.code:
                    diag(fname, n, "DanglingSuccessor", f"successor {s} does not exist")
            for r in uses(i) + defs(i):
                if not _valid_reg(r):
                    diag(fname, n, "BadName", f"invalid register name {r!r}")
            if isinstance(i, (Iload, Istore)) and i.off % 8:
                diag(fname, n, "Alignment", f"access offset {i.off} is not a multiple of 8")
            elif isinstance(i, Iop):
                ar = OPCODES.get(i.op.name)
                if ar is None:
                    diag(fname, n, "UnknownOpcode", f"unknown opcode {i.op.name!r}")
                elif ar != len(i.args):
                    diag(fname, n, "OpArity", f"{i.op.name} takes {ar} arguments, got {len(i.args)}")
                if i.op.name == "codeaddr":
                    tf, tn = i.op.target
                    if tf not in p.functions or tn not in p.functions[tf].code:
                        diag(fname, n, "BadCodeAddress", f"codeaddr target {tf}.{tn} does not exist")
            elif isinstance(i, (Icall, Itailcall)):
                if i.callee not in p.functions and i.callee not in BUILTINS:
                    diag(fname, n, "UnresolvedCallee", f"callee {i.callee!r} is not defined")
            elif isinstance(i, Iextcall):
                if i.name not in BUILTINS:
                    diag(fname, n, "UnknownBuiltin", f"unknown builtin {i.name!r}")
                elif BUILTINS[i.name] != len(i.args):
                    diag(fname, n, "BuiltinArity",
                         f"{i.name} takes {BUILTINS[i.name]} arguments, got {len(i.args)}")
            elif isinstance(i, Icond):
                if i.cond not in CONDITIONS:
                    diag(fname, n, "UnknownCondition", f"unknown condition {i.cond!r}")
            elif isinstance(i, Ijumptable) and not i.targets:
                diag(fname, n, "EmptyJumptable", "jumptable needs at least one target")
    return out


# -- printing -----------------------------------------------------------------


def _args(rs) -> str:
    return ", ".join(rs)


def format_instr(i: Instr) -> str:
    if isinstance(i, Iop):
        rhs = str(i.op)
        if i.args:
            rhs += " " + _args(i.args)
        return f"{i.dst} := {rhs} goto {i.succ}"
    if isinstance(i, Iload):
        return f"{i.dst} := load {i.addr}[{i.off}] goto {i.succ}"
    if isinstance(i, Istore):
        return f"store {i.addr}[{i.off}] := {i.src} goto {i.succ}"
    if isinstance(i, Icall):
        return f"{i.dst} := call {i.callee}({_args(i.args)}) goto {i.succ}"
    if isinstance(i, Iextcall):
        return f"{i.dst} := extcall {i.name}({_args(i.args)}) goto {i.succ}"
    if isinstance(i, Itailcall):
        return f"tailcall {i.callee}({_args(i.args)})"
    if isinstance(i, Icond):
        return f"if {i.cond} {i.args[0]}, {i.args[1]} goto {i.if_true} else {i.if_false}"
    if isinstance(i, Ijumptable):
        return f"jumptable {i.index} [{', '.join(map(str, i.targets))}]"
    if isinstance(i, Ireturn):
        return "return" if i.src is None else f"return {i.src}"
    if isinstance(i, (Iretvia, Iretaa)):
        kw = "retvia" if isinstance(i, Iretvia) else "retaa"
        return f"{kw} {i.src}" if i.val is None else f"{kw} {i.src}, {i.val}"
    raise TypeError(f"not an instruction: {i!r}")


def print_function(f: Function) -> str:
    head = f"function {f.name}({_args(f.params)}) stacksize {f.stacksize}"
    if f.code and f.entry != min(f.code):
        head += f" entry {f.entry}"
    if f.ra_offset is not None:
        head += f" raslot {f.ra_offset}"
    lines = [head + " {"]
    for n in sorted(f.code):
        lines.append(f"  {n}: {format_instr(f.code[n])}")
    lines.append("}")
    return "\n".join(lines)


def print_program(p: Program) -> str:
    parts = [print_function(f) for f in p.functions.values()]
    if p.main != "main":
        parts.append(f"main {p.main}")
    return "\n\n".join(parts) + "\n"


# -- parsing ------------------------------------------------------------------


class ParseError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        self.msg, self.line, self.col = msg, line, col
        super().__init__(f"line {line}, column {col}: {msg}")


_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>\#[^\n]*)"
    r"|(?P<num>-?\d+)|(?P<ident>\$?[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<assign>:=)|(?P<punct>[(){}\[\],:;.])"
)


@dataclass(slots=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> List[_Tok]:
    toks: List[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str, allow_reserved: bool):
        self.toks = _tokenize(text)
        self.i = 0
        self.allow_reserved = allow_reserved

    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Optional[_Tok] = None):
        tok = tok or self.peek()
        raise ParseError(msg, tok.line, tok.col)

    def next(self) -> _Tok:
        t = self.peek()
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            self.error(f"expected {text!r}, found {t.text or 'end of input'!r}", t)
        return t

    def accept(self, text: str) -> bool:
        if self.peek().text == text and self.peek().kind != "eof":
            self.i += 1
            return True
        return False

    def number(self) -> int:
        t = self.next()
        if t.kind != "num":
            self.error(f"expected a number, found {t.text or 'end of input'!r}", t)
        return int(t.text)

    def node(self) -> int:
        t = self.peek()
        n = self.number()
        if n <= 0:
            self.error("node ids must be positive", t)
        return n

    def ident(self, what: str = "identifier") -> str:
        t = self.next()
        if t.kind != "ident":
            self.error(f"expected {what}, found {t.text or 'end of input'!r}", t)
        if t.text.startswith("$"):
            if what != "register" or not self.allow_reserved or not _valid_reg(t.text):
                self.error(f"reserved name {t.text!r} is not allowed here", t)
        return t.text

    def reg(self) -> str:
        return self.ident("register")

    def reg_list(self, close: str) -> Tuple[Reg, ...]:
        out: List[Reg] = []
        if self.accept(close):
            return ()
        out.append(self.reg())
        while self.accept(","):
            out.append(self.reg())
        self.expect(close)
        return tuple(out)

    def program(self) -> Program:
        funcs: Dict[str, Function] = {}
        main = None
        while self.peek().kind != "eof":
            t = self.peek()
            if t.text == "function":
                f = self.function()
                if f.name in funcs:
                    self.error(f"duplicate function {f.name!r}", t)
                funcs[f.name] = f
            elif t.text == "main":
                self.next()
                if main is not None:
                    self.error("duplicate main directive", t)
                main = self.ident("function name")
            else:
                self.error(f"expected 'function' or 'main', found {t.text!r}")
        return Program(funcs, main or "main")

    def function(self) -> Function:
        self.expect("function")
        name = self.ident("function name")
        self.expect("(")
        params = self.reg_list(")")
        self.expect("stacksize")
        stacksize = self.number()
        entry = ra_offset = None
        while self.peek().text in ("entry", "raslot"):
            kw = self.next().text
            if kw == "entry":
                entry = self.node()
            else:
                ra_offset = self.number()
        self.expect("{")
        code: Dict[Node, Instr] = {}
        while not self.accept("}"):
            t = self.peek()
            n = self.node()
            self.expect(":")
            if n in code:
                self.error(f"duplicate node id {n}", t)
            code[n] = self.instr()
            self.accept(";")
        if entry is None:
            entry = min(code) if code else 1
        return Function(name, params, stacksize, entry, code, ra_offset)

    def goto(self) -> Node:
        self.expect("goto")
        return self.node()

    def instr(self) -> Instr:
        t = self.peek()
        if t.kind == "ident" and self.peek(1).kind == "assign":
            dst = self.reg()
            self.expect(":=")
            return self.assignment(dst)
        kw = self.next()
        if kw.text == "store":
            addr = self.reg()
            self.expect("[")
            off = self.number()
            self.expect("]")
            self.expect(":=")
            src = self.reg()
            return Istore(addr, off, src, self.goto())
        if kw.text == "tailcall":
            callee = self.ident("function name")
            self.expect("(")
            return Itailcall(callee, self.reg_list(")"))
        if kw.text == "if":
            c = self.next()
            if c.text not in CONDITIONS:
                self.error(f"unknown condition {c.text!r}", c)
            a = self.reg()
            self.expect(",")
            b = self.reg()
            ift = self.goto()
            self.expect("else")
            return Icond(c.text, (a, b), ift, self.node())
        if kw.text == "jumptable":
            idx = self.reg()
            self.expect("[")
            targets = [self.node()]
            while self.accept(","):
                targets.append(self.node())
            self.expect("]")
            return Ijumptable(idx, tuple(targets))
        if kw.text == "return":
            if self.peek().kind == "ident" and self.peek(1).text != ":":
                return Ireturn(self.reg())
            return Ireturn(None)
        if kw.text in ("retvia", "retaa"):
            src = self.reg()
            val = self.reg() if self.accept(",") else None
            return (Iretvia if kw.text == "retvia" else Iretaa)(src, val)
        self.error(f"unknown instruction {kw.text!r}", kw)

    def assignment(self, dst: Reg) -> Instr:
        t = self.next()
        op = t.text
        if op == "load":
            addr = self.reg()
            self.expect("[")
            off = self.number()
            self.expect("]")
            return Iload(addr, off, dst, self.goto())
        if op in ("call", "extcall"):
            name = self.ident("function name")
            self.expect("(")
            args = self.reg_list(")")
            cls = Icall if op == "call" else Iextcall
            return cls(name, args, dst, self.goto())
        if op not in OPCODES:
            self.error(f"unknown opcode {op!r}", t)
        if op == "const":
            return Iop(Operation("const", imm=self.number()), (), dst, self.goto())
        if op == "codeaddr":
            f = self.ident("function name")
            self.expect(".")
            n = self.node()
            return Iop(Operation("codeaddr", target=(f, n)), (), dst, self.goto())
        args: List[Reg] = []
        if self.peek().text != "goto":
            args.append(self.reg())
            while self.accept(","):
                args.append(self.reg())
        if len(args) != OPCODES[op]:
            self.error(f"{op} takes {OPCODES[op]} arguments, got {len(args)}", t)
        return Iop(Operation(op), tuple(args), dst, self.goto())


def parse_program(text: str, *, check: bool = True, allow_reserved: bool = False) -> Program:
    """Parse ``.rtl`` text.

    ``allow_reserved`` admits ``$t``-prefixed temporaries, which only compiler
    passes may introduce.  With ``check`` the result must be well-formed or a
    :class:`WellformedError` is raised.
    """
    p = _Parser(text, allow_reserved).program()
    if check:
        diags = check_wellformed(p)
        if diags:
            raise WellformedError(diags)
    return p


# -- helpers shared by passes -------------------------------------------------


class FreshNodes:
    """Dense fresh node ids above the current maximum."""

    def __init__(self, code: Dict[Node, Instr]):
        self.next = (max(code) if code else 0) + 1

    def __call__(self) -> Node:
        n = self.next
        self.next += 1
        return n


class FreshRegs:
    """Fresh ``$tN`` temporaries not used anywhere in a function."""

    def __init__(self, f: Function):
        used = [int(r[2:]) for r in f.registers() if r.startswith(RESERVED_PREFIX)]
        self.next = max(used, default=0) + 1

    def __call__(self) -> Reg:
        r = f"{RESERVED_PREFIX}{self.next}"
        self.next += 1
        return r


def iter_instrs(p: Program) -> Iterator[Tuple[str, Node, Instr]]:
    for fname, f in p.functions.items():
        for n in sorted(f.code):
            yield fname, n, f.code[n]
