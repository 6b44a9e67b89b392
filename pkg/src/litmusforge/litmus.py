"""Frontend for LISA litmus tests.

A litmus file looks like this::

    LISA SB
    { x = 0; y = 0; }
     P0:      | P1:      ;
     w[] x 1  | w[] y 1  ;
     r[] r1 y | r[] r2 x ;
    exists (0:r1=0 /\\ 1:r2=0)

Structure: a header line ``LISA <name>``, optional metadata lines, a
prelude in braces with ``;``-separated ``location = integer`` items, a
process table whose header row names the columns ``P0: | P1: | ...``
and whose instruction rows are ``|``-separated cells terminated by
``;``, and a final condition line ``exists (...)``, ``~exists (...)``
or ``forall (...)``.  ``(* ... *)`` comments are allowed anywhere and
may nest.  Locations absent from the prelude are initialised to 0.

Instructions:

    w[tags] x e     write expression e to shared location x
    r[tags] r1 x    read shared location x into register r1
    b[tags] r1 L    branch to label L if r1 is 1, fall through if 0
    j L             unconditional jump
    mov r1 e        register computation, no memory event
    f[tags]         fence

Expressions over registers are written in prefix form: ``1``, ``r1``,
``(add r1 1)``, ``(neq r2 1)``, ``(sub r1)`` (unary negation).  The
comparison operators yield 1 for true and 0 for false.

Labels are written ``L:`` in front of an instruction; a label in a
cell of its own attaches to the next instruction in the same column
(or to the end of the process when nothing follows).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Mapping

BINARY_OPS = ("add", "sub", "and", "or", "xor", "eq", "neq")
UNARY_OPS = ("sub",)

# Names the cat engine predefines; annotation tags must not shadow them.
RESERVED_CAT_NAMES = frozenset(
    {"po", "rf", "co", "fr", "loc", "ext", "int", "id",
     "R", "W", "F", "B", "IW", "M", "emptyset", "_"}
)


class LitmusError(Exception):
    """Base class for everything this package raises on bad input."""


class ParseError(LitmusError):
    """Lexical or syntactic error, with a source position."""

    def __init__(self, message: str, filename: str = "<litmus>",
                 line: int = 0, col: int = 0):
        self.message = message
        self.filename = filename
        self.line = line
        self.col = col
        super().__init__(f"{filename}:{line}:{col}: {message}")


class ValidationError(LitmusError):
    """Structurally well-formed test that violates a static invariant."""


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Const(Expr):
    value: int


@dataclass(frozen=True)
class Reg(Expr):
    name: str


@dataclass(frozen=True)
class Unop(Expr):
    op: str
    arg: Expr


@dataclass(frozen=True)
class Binop(Expr):
    op: str
    left: Expr
    right: Expr


def eval_expr(expr: Expr, regs: Callable[[str], int]) -> int:
    """Evaluate an expression; `regs` maps a register name to its value."""
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Reg):
        return regs(expr.name)
    if isinstance(expr, Unop):
        v = eval_expr(expr.arg, regs)
        if expr.op == "sub":
            return -v
        raise LitmusError(f"unknown unary operator {expr.op!r}")
    if isinstance(expr, Binop):
        a = eval_expr(expr.left, regs)
        b = eval_expr(expr.right, regs)
        return apply_binop(expr.op, a, b)
    raise LitmusError(f"not an expression: {expr!r}")


def apply_binop(op: str, a: int, b: int) -> int:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    if op == "eq":
        return 1 if a == b else 0
    if op == "neq":
        return 1 if a != b else 0
    raise LitmusError(f"unknown operator {op!r}")


def expr_registers(expr: Expr) -> frozenset[str]:
    if isinstance(expr, Reg):
        return frozenset((expr.name,))
    if isinstance(expr, Unop):
        return expr_registers(expr.arg)
    if isinstance(expr, Binop):
        return expr_registers(expr.left) | expr_registers(expr.right)
    return frozenset()


def format_expr(expr: Expr) -> str:
    if isinstance(expr, Const):
        return str(expr.value)
    if isinstance(expr, Reg):
        return expr.name
    if isinstance(expr, Unop):
        return f"({expr.op} {format_expr(expr.arg)})"
    if isinstance(expr, Binop):
        return f"({expr.op} {format_expr(expr.left)} {format_expr(expr.right)})"
    raise LitmusError(f"not an expression: {expr!r}")


# ---------------------------------------------------------------------------
# Instructions and processes


@dataclass(frozen=True)
class Instruction:
    pass


@dataclass(frozen=True)
class Write(Instruction):
    annotations: tuple[str, ...]
    location: str
    value: Expr


@dataclass(frozen=True)
class Read(Instruction):
    annotations: tuple[str, ...]
    register: str
    location: str


@dataclass(frozen=True)
class Branch(Instruction):
    annotations: tuple[str, ...]
    register: str
    target: str


@dataclass(frozen=True)
class Jump(Instruction):
    target: str


@dataclass(frozen=True)
class Mov(Instruction):
    register: str
    value: Expr


@dataclass(frozen=True)
class Fence(Instruction):
    annotations: tuple[str, ...]


@dataclass(frozen=True)
class Process:
    """One column of the litmus table.

    `labels` maps label names to instruction indices; an index equal to
    `len(instructions)` denotes the end of the process.
    """

    index: int
    instructions: tuple[Instruction, ...]
    labels: tuple[tuple[str, int], ...] = ()

    def label_index(self, name: str) -> int | None:
        for lbl, idx in self.labels:
            if lbl == name:
                return idx
        return None

    def registers(self) -> frozenset[str]:
        """Every register mentioned anywhere in this process."""
        regs: set[str] = set()
        for ins in self.instructions:
            if isinstance(ins, Read):
                regs.add(ins.register)
            elif isinstance(ins, Mov):
                regs.add(ins.register)
                regs |= expr_registers(ins.value)
            elif isinstance(ins, Write):
                regs |= expr_registers(ins.value)
            elif isinstance(ins, Branch):
                regs.add(ins.register)
        return frozenset(regs)

    def locations(self) -> frozenset[str]:
        locs = set()
        for ins in self.instructions:
            if isinstance(ins, (Write, Read)):
                locs.add(ins.location)
        return frozenset(locs)


# ---------------------------------------------------------------------------
# Final condition


@dataclass(frozen=True)
class CondExpr:
    pass


@dataclass(frozen=True)
class RegAtom(CondExpr):
    proc: int
    register: str
    value: int


@dataclass(frozen=True)
class LocAtom(CondExpr):
    location: str
    value: int


@dataclass(frozen=True)
class CondNot(CondExpr):
    arg: CondExpr


@dataclass(frozen=True)
class CondAnd(CondExpr):
    left: CondExpr
    right: CondExpr


@dataclass(frozen=True)
class CondOr(CondExpr):
    left: CondExpr
    right: CondExpr


@dataclass(frozen=True)
class Condition:
    quantifier: str  # "exists" | "~exists" | "forall"
    body: CondExpr


def eval_cond(body: CondExpr, regs: Mapping[tuple[int, str], int],
              mem: Mapping[str, int]) -> bool:
    """Evaluate a condition body against final register and memory values.

    Registers missing from `regs` read as 0 (never assigned on the
    chosen path); locations must all be present in `mem`.
    """
    if isinstance(body, RegAtom):
        return regs.get((body.proc, body.register), 0) == body.value
    if isinstance(body, LocAtom):
        return mem[body.location] == body.value
    if isinstance(body, CondNot):
        return not eval_cond(body.arg, regs, mem)
    if isinstance(body, CondAnd):
        return eval_cond(body.left, regs, mem) and eval_cond(body.right, regs, mem)
    if isinstance(body, CondOr):
        return eval_cond(body.left, regs, mem) or eval_cond(body.right, regs, mem)
    raise LitmusError(f"not a condition: {body!r}")


def cond_atoms(body: CondExpr) -> Iterator[CondExpr]:
    if isinstance(body, (RegAtom, LocAtom)):
        yield body
    elif isinstance(body, CondNot):
        yield from cond_atoms(body.arg)
    elif isinstance(body, (CondAnd, CondOr)):
        yield from cond_atoms(body.left)
        yield from cond_atoms(body.right)


def format_cond(body: CondExpr) -> str:
    # Non-atomic subterms are parenthesised so the printed form reparses
    # to a structurally identical tree.
    def wrap(e: CondExpr) -> str:
        s = format_cond(e)
        return s if isinstance(e, (RegAtom, LocAtom)) else f"({s})"

    if isinstance(body, RegAtom):
        return f"{body.proc}:{body.register}={body.value}"
    if isinstance(body, LocAtom):
        return f"{body.location}={body.value}"
    if isinstance(body, CondNot):
        return f"~{wrap(body.arg)}"
    if isinstance(body, CondAnd):
        return f"{wrap(body.left)} /\\ {wrap(body.right)}"
    if isinstance(body, CondOr):
        return f"{wrap(body.left)} \\/ {wrap(body.right)}"
    raise LitmusError(f"not a condition: {body!r}")


# ---------------------------------------------------------------------------
# The test itself


@dataclass(frozen=True)
class LitmusTest:
    name: str
    prelude: tuple[tuple[str, int], ...]
    processes: tuple[Process, ...]
    condition: Condition
    metadata: tuple[str, ...] = ()
    annotations: frozenset[str] = frozenset()

    def locations(self) -> tuple[str, ...]:
        """All shared locations, sorted: prelude, instructions, condition."""
        locs = {name for name, _ in self.prelude}
        for proc in self.processes:
            locs |= proc.locations()
        for atom in cond_atoms(self.condition.body):
            if isinstance(atom, LocAtom):
                locs.add(atom.location)
        return tuple(sorted(locs))

    def initial_value(self, location: str) -> int:
        for name, value in self.prelude:
            if name == location:
                return value
        return 0


# ---------------------------------------------------------------------------
# Lexing helpers

_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|-?\d+|[\[\](),:=~/\\]")

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_INT_RE = re.compile(r"-?\d+$")


def _strip_comments(text: str, filename: str) -> str:
    """Replace (* ... *) comments (nesting allowed) with spaces.

    Newlines inside comments survive so later error positions stay
    accurate.
    """
    out = []
    depth = 0
    i = 0
    line, col = 1, 1
    open_pos = (0, 0)
    while i < len(text):
        two = text[i:i + 2]
        if two == "(*":
            if depth == 0:
                open_pos = (line, col)
            depth += 1
            out.append("  ")
            i += 2
            col += 2
        elif two == "*)" and depth > 0:
            depth -= 1
            out.append("  ")
            i += 2
            col += 2
        else:
            ch = text[i]
            if ch == "\n":
                out.append("\n")
                line += 1
                col = 1
            else:
                out.append(ch if depth == 0 else " ")
                col += 1
            i += 1
    if depth > 0:
        raise ParseError("unterminated comment", filename, *open_pos)
    return "".join(out)


class _CellLexer:
    """Token stream over one table cell (or the condition tail)."""

    def __init__(self, text: str, filename: str, line: int, col0: int):
        self.filename = filename
        self.line = line
        self.tokens: list[tuple[str, int]] = []  # (token, column)
        pos = 0
        while pos < len(text):
            if text[pos].isspace():
                pos += 1
                continue
            m = _TOKEN_RE.match(text, pos)
            if not m:
                raise ParseError(f"unexpected character {text[pos]!r}",
                                 filename, line, col0 + pos)
            self.tokens.append((m.group(0), col0 + pos))
            pos = m.end()
        self.i = 0

    def peek(self) -> str | None:
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def next(self, what: str = "token") -> tuple[str, int]:
        if self.i >= len(self.tokens):
            last_col = self.tokens[-1][1] if self.tokens else 1
            raise ParseError(f"expected {what}, found end of cell",
                             self.filename, self.line, last_col)
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, literal: str) -> None:
        tok, col = self.next(repr(literal))
        if tok != literal:
            raise ParseError(f"expected {literal!r}, found {tok!r}",
                             self.filename, self.line, col)

    def done(self) -> bool:
        return self.i >= len(self.tokens)

    def error(self, message: str) -> ParseError:
        col = self.tokens[self.i][1] if self.i < len(self.tokens) else (
            self.tokens[-1][1] if self.tokens else 1)
        return ParseError(message, self.filename, self.line, col)


def _parse_ident(lex: _CellLexer, what: str) -> str:
    tok, col = lex.next(what)
    if not _IDENT_RE.match(tok):
        raise ParseError(f"expected {what}, found {tok!r}",
                         lex.filename, lex.line, col)
    return tok


def _parse_int(lex: _CellLexer, what: str = "integer") -> int:
    tok, col = lex.next(what)
    if not _INT_RE.match(tok):
        raise ParseError(f"expected {what}, found {tok!r}",
                         lex.filename, lex.line, col)
    return int(tok)


def _parse_annotations(lex: _CellLexer) -> tuple[str, ...]:
    lex.expect("[")
    tags: list[str] = []
    while lex.peek() != "]":
        tags.append(_parse_ident(lex, "annotation tag"))
        if lex.peek() == ",":
            lex.next()
    lex.expect("]")
    return tuple(tags)


def _parse_expr(lex: _CellLexer) -> Expr:
    tok, col = lex.next("expression")
    if _INT_RE.match(tok):
        return Const(int(tok))
    if tok == "(":
        op, opcol = lex.next("operator")
        if op not in BINARY_OPS:
            raise ParseError(f"unknown operator {op!r}",
                             lex.filename, lex.line, opcol)
        first = _parse_expr(lex)
        if lex.peek() == ")":
            lex.expect(")")
            if op not in UNARY_OPS:
                raise ParseError(f"operator {op!r} is not unary",
                                 lex.filename, lex.line, opcol)
            return Unop(op, first)
        second = _parse_expr(lex)
        lex.expect(")")
        return Binop(op, first, second)
    if _IDENT_RE.match(tok):
        return Reg(tok)
    raise ParseError(f"expected expression, found {tok!r}",
                     lex.filename, lex.line, col)


def _parse_cell(lex: _CellLexer) -> tuple[list[str], Instruction | None]:
    """Parse one table cell into (labels, instruction or None)."""
    labels: list[str] = []
    while (self_tok := lex.peek()) is not None:
        # A label is an identifier directly followed by ':'.
        if (_IDENT_RE.match(self_tok)
                and lex.i + 1 < len(lex.tokens)
                and lex.tokens[lex.i + 1][0] == ":"):
            labels.append(lex.next()[0])
            lex.next()  # ':'
            continue
        break
    if lex.done():
        return labels, None

    mnemonic, col = lex.next("instruction")
    if mnemonic == "w":
        anns = _parse_annotations(lex)
        loc = _parse_ident(lex, "location")
        value = _parse_expr(lex)
        ins: Instruction = Write(anns, loc, value)
    elif mnemonic == "r":
        anns = _parse_annotations(lex)
        reg = _parse_ident(lex, "register")
        loc = _parse_ident(lex, "location")
        ins = Read(anns, reg, loc)
    elif mnemonic == "b":
        anns = _parse_annotations(lex)
        reg = _parse_ident(lex, "register")
        target = _parse_ident(lex, "label")
        ins = Branch(anns, reg, target)
    elif mnemonic == "f":
        anns = _parse_annotations(lex)
        ins = Fence(anns)
    elif mnemonic == "mov":
        reg = _parse_ident(lex, "register")
        value = _parse_expr(lex)
        ins = Mov(reg, value)
    elif mnemonic == "j":
        target = _parse_ident(lex, "label")
        ins = Jump(target)
    else:
        raise ParseError(f"unknown mnemonic {mnemonic!r}",
                         lex.filename, lex.line, col)
    if not lex.done():
        raise lex.error("trailing tokens after instruction")
    return labels, ins


def _parse_cond_expr(lex: _CellLexer) -> CondExpr:
    return _parse_cond_or(lex)


def _parse_cond_or(lex: _CellLexer) -> CondExpr:
    left = _parse_cond_and(lex)
    while lex.peek() == "\\" and _peek2(lex) == "/":
        lex.next()
        lex.next()
        left = CondOr(left, _parse_cond_and(lex))
    return left


def _parse_cond_and(lex: _CellLexer) -> CondExpr:
    left = _parse_cond_not(lex)
    while lex.peek() == "/" and _peek2(lex) == "\\":
        lex.next()
        lex.next()
        left = CondAnd(left, _parse_cond_not(lex))
    return left


def _parse_cond_not(lex: _CellLexer) -> CondExpr:
    if lex.peek() == "~":
        lex.next()
        return CondNot(_parse_cond_not(lex))
    return _parse_cond_atom(lex)


def _peek2(lex: _CellLexer) -> str | None:
    return lex.tokens[lex.i + 1][0] if lex.i + 1 < len(lex.tokens) else None


def _parse_cond_atom(lex: _CellLexer) -> CondExpr:
    if lex.peek() == "(":
        lex.next()
        inner = _parse_cond_expr(lex)
        lex.expect(")")
        return inner
    tok, col = lex.next("condition atom")
    if _INT_RE.match(tok) and lex.peek() == ":":
        lex.next()  # ':'
        reg = _parse_ident(lex, "register")
        lex.expect("=")
        value = _parse_int(lex)
        return RegAtom(int(tok), reg, value)
    if _IDENT_RE.match(tok):
        lex.expect("=")
        value = _parse_int(lex)
        return LocAtom(tok, value)
    raise ParseError(f"expected condition atom, found {tok!r}",
                     lex.filename, lex.line, col)


# ---------------------------------------------------------------------------
# File-level parsing

_HEADER_RE = re.compile(r"^\s*LISA\s+(\S+)\s*$")
_COND_START_RE = re.compile(r"^\s*(~\s*exists|exists|forall)\b")
_PROC_HEADER_RE = re.compile(r"^P(\d+):?$")


def parse_litmus(text: str, filename: str = "<litmus>") -> LitmusTest:
    """Parse litmus file text into a LitmusTest.

    Raises ParseError (with file:line:col) on malformed input.
    """
    text = _strip_comments(text, filename)
    lines = text.split("\n")
    n = len(lines)
    i = 0

    def skip_blank() -> None:
        nonlocal i
        while i < n and not lines[i].strip():
            i += 1

    # Header
    skip_blank()
    if i >= n:
        raise ParseError("empty litmus file", filename, 1, 1)
    m = _HEADER_RE.match(lines[i])
    if not m:
        raise ParseError("expected header line 'LISA <name>'",
                         filename, i + 1, 1)
    name = m.group(1)
    i += 1

    # Metadata lines until the prelude's opening brace.
    metadata: list[str] = []
    skip_blank()
    while i < n and not lines[i].lstrip().startswith("{"):
        metadata.append(lines[i].strip())
        i += 1
        skip_blank()
    if i >= n:
        raise ParseError("missing prelude '{ ... }'", filename, n, 1)

    # Prelude, possibly spanning lines.
    brace_line = i
    brace_col = lines[i].index("{") + 1
    chunk: list[str] = []
    col = lines[i].index("{") + 1
    closed = False
    while i < n:
        seg = lines[i][col:] if i == brace_line else lines[i]
        if "}" in seg:
            chunk.append(seg[:seg.index("}")])
            col_after = (col if i == brace_line else 0) + seg.index("}") + 1
            closed = True
            break
        chunk.append(seg)
        i += 1
        col = 0
    if not closed:
        raise ParseError("unterminated prelude", filename, brace_line + 1,
                         brace_col)
    prelude = _parse_prelude(chunk, filename, brace_line, brace_col)
    rest_of_line = lines[i][col_after:]
    if rest_of_line.strip():
        raise ParseError("unexpected text after prelude",
                         filename, i + 1, col_after + 1)
    i += 1

    # Process table: everything up to the condition line.
    skip_blank()
    table_rows: list[tuple[int, list[tuple[str, int]]]] = []
    cond_line = None
    while i < n:
        stripped = lines[i].strip()
        if not stripped:
            i += 1
            continue
        if _COND_START_RE.match(lines[i]):
            cond_line = i
            break
        for row in _split_rows(lines[i], filename, i):
            table_rows.append((i, row))
        i += 1
    if not table_rows:
        raise ParseError("no processes", filename, i if i < n else n, 1)

    processes = _parse_table(table_rows, filename)

    if cond_line is None:
        raise ParseError("missing final condition", filename, n, 1)
    cond_text = "\n".join(lines[cond_line:])
    condition = _parse_condition(cond_text, filename, cond_line)

    return LitmusTest(name=name, prelude=prelude, processes=processes,
                      condition=condition, metadata=tuple(metadata))


def _parse_prelude(chunk: list[str], filename: str, line0: int,
                   col0: int) -> tuple[tuple[str, int], ...]:
    body = " ".join(chunk)
    items: list[tuple[str, int]] = []
    seen: set[str] = set()
    for part in body.split(";"):
        if not part.strip():
            continue
        m = re.match(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(-?\d+)\s*$", part)
        if not m:
            raise ParseError(f"bad prelude item {part.strip()!r} "
                             "(expected 'location = integer')",
                             filename, line0 + 1, col0)
        loc = m.group(1)
        if loc in seen:
            raise ParseError(f"duplicate prelude location {loc!r}",
                             filename, line0 + 1, col0)
        seen.add(loc)
        items.append((loc, int(m.group(2))))
    return tuple(items)


def _split_rows(line: str, filename: str,
                lineno: int) -> list[list[tuple[str, int]]]:
    """Split one physical line into rows (by ';'), rows into cells (by '|').

    Returns a list of rows, each row a list of (cell text, start column).
    """
    if not line.rstrip().endswith(";"):
        raise ParseError("instruction row must end with ';'",
                         filename, lineno + 1, len(line.rstrip()))
    rows = []
    start = 0
    for k, ch in enumerate(line):
        if ch != ";":
            continue
        segment = line[start:k]
        cells = []
        cstart = start
        for j in range(start, k + 1):
            if j == k or line[j] == "|":
                cells.append((line[cstart:j], cstart))
                cstart = j + 1
        rows.append(cells)
        start = k + 1
    if line[start:].strip():
        raise ParseError("instruction row must end with ';'",
                         filename, lineno + 1, start + 1)
    return rows


def _parse_table(rows: list[tuple[int, list[tuple[str, int]]]],
                 filename: str) -> tuple[Process, ...]:
    header_line, header = rows[0]
    nproc = len(header)
    for k, (cell, col) in enumerate(header):
        m = _PROC_HEADER_RE.match(cell.strip())
        if not m:
            raise ParseError(f"bad process header cell {cell.strip()!r}",
                             filename, header_line + 1, col + 1)
        if int(m.group(1)) != k:
            raise ParseError(
                f"process columns must be numbered 0..{nproc - 1} in order, "
                f"found P{m.group(1)} in column {k}",
                filename, header_line + 1, col + 1)

    instrs: list[list[Instruction]] = [[] for _ in range(nproc)]
    labels: list[dict[str, int]] = [{} for _ in range(nproc)]
    pending: list[list[str]] = [[] for _ in range(nproc)]
    label_pos: list[dict[str, tuple[int, int]]] = [{} for _ in range(nproc)]

    for lineno, cells in rows[1:]:
        if len(cells) != nproc:
            raise ParseError(
                f"row has {len(cells)} columns, expected {nproc}",
                filename, lineno + 1, cells[0][1] + 1)
        if all(not cell.strip() for cell, _ in cells):
            continue
        for k, (cell, col) in enumerate(cells):
            lex = _CellLexer(cell, filename, lineno + 1, col + 1)
            cell_labels, ins = _parse_cell(lex)
            for lbl in cell_labels:
                if lbl in labels[k]:
                    raise ParseError(
                        f"duplicate label {lbl!r} in process {k}",
                        filename, lineno + 1, col + 1)
                labels[k][lbl] = len(instrs[k])  # fixed up when attached
                label_pos[k][lbl] = (lineno + 1, col + 1)
                pending[k].append(lbl)
            if ins is not None:
                for lbl in pending[k]:
                    labels[k][lbl] = len(instrs[k])
                pending[k].clear()
                instrs[k].append(ins)

    processes = []
    for k in range(nproc):
        for lbl in pending[k]:
            labels[k][lbl] = len(instrs[k])  # label at end of process
        ordered = tuple(sorted(labels[k].items(), key=lambda kv: (kv[1], kv[0])))
        processes.append(Process(index=k, instructions=tuple(instrs[k]),
                                 labels=ordered))
    return tuple(processes)


def _parse_condition(text: str, filename: str, line0: int) -> Condition:
    m = re.match(r"^\s*(~\s*exists|exists|forall)\b", text)
    if not m:
        raise ParseError("expected final condition", filename, line0 + 1, 1)
    quantifier = "~exists" if m.group(1).startswith("~") else m.group(1)
    tail = text[m.end():]
    lex = _CellLexer(tail.replace("\n", " "), filename, line0 + 1,
                     m.end() + 1)
    lex.expect("(")
    body = _parse_cond_expr(lex)
    lex.expect(")")
    if not lex.done():
        raise lex.error("trailing tokens after condition")
    return Condition(quantifier=quantifier, body=body)


# ---------------------------------------------------------------------------
# Validation


def validate(test: LitmusTest) -> LitmusTest:
    """Check cross-references and collect the annotation universe.

    Returns the test with its `annotations` field filled in; raises
    ValidationError on unresolved labels or condition atoms that name
    unknown processes, registers, or locations.
    """
    if not test.processes:
        raise ValidationError("no processes")

    tags: set[str] = set()
    known_locs = {name for name, _ in test.prelude}
    for proc in test.processes:
        known_locs |= proc.locations()
        label_names = {lbl for lbl, _ in proc.labels}
        for ins in proc.instructions:
            if isinstance(ins, (Branch, Jump)):
                if ins.target not in label_names:
                    raise ValidationError(
                        f"unresolved label {ins.target} in process {proc.index}")
            if isinstance(ins, (Write, Read, Branch, Fence)):
                tags.update(ins.annotations)

    clash = tags & RESERVED_CAT_NAMES
    if clash:
        raise ValidationError(
            "annotation tags collide with predefined cat names: "
            + ", ".join(sorted(clash)))

    nproc = len(test.processes)
    for atom in cond_atoms(test.condition.body):
        if isinstance(atom, RegAtom):
            if not 0 <= atom.proc < nproc:
                raise ValidationError(f"no process {atom.proc}")
            if atom.register not in test.processes[atom.proc].registers():
                raise ValidationError(
                    f"condition references unknown register "
                    f"{atom.register} in process {atom.proc}")
        elif isinstance(atom, LocAtom):
            if atom.location not in known_locs:
                raise ValidationError(
                    f"condition references unknown location {atom.location}")

    return replace(test, annotations=frozenset(tags))


def load_litmus(path) -> LitmusTest:
    """Read, parse, and validate a .litmus file."""
    with open(path, encoding="utf-8") as fh:
        return validate(parse_litmus(fh.read(), filename=str(path)))


# ---------------------------------------------------------------------------
# Pretty printing


def format_instruction(ins: Instruction) -> str:
    if isinstance(ins, Write):
        return f"w[{','.join(ins.annotations)}] {ins.location} " \
               f"{format_expr(ins.value)}"
    if isinstance(ins, Read):
        return f"r[{','.join(ins.annotations)}] {ins.register} {ins.location}"
    if isinstance(ins, Branch):
        return f"b[{','.join(ins.annotations)}] {ins.register} {ins.target}"
    if isinstance(ins, Jump):
        return f"j {ins.target}"
    if isinstance(ins, Mov):
        return f"mov {ins.register} {format_expr(ins.value)}"
    if isinstance(ins, Fence):
        return f"f[{','.join(ins.annotations)}]"
    raise LitmusError(f"not an instruction: {ins!r}")


def format_litmus(test: LitmusTest) -> str:
    """Render a test to canonical litmus text that reparses equal."""
    out = [f"LISA {test.name}"]
    out.append("{ " + " ".join(f"{loc} = {val};" for loc, val in test.prelude)
               + " }" if test.prelude else "{ }")

    # Build column cells: one row per instruction index, labels in front.
    columns: list[list[str]] = []
    for proc in test.processes:
        by_index: dict[int, list[str]] = {}
        for lbl, idx in proc.labels:
            by_index.setdefault(idx, []).append(lbl)
        cells = []
        for idx, ins in enumerate(proc.instructions):
            prefix = "".join(f"{lbl}: " for lbl in by_index.get(idx, []))
            cells.append(prefix + format_instruction(ins))
        trailing = by_index.get(len(proc.instructions))
        if trailing:
            cells.append("".join(f"{lbl}:" for lbl in trailing))
        columns.append(cells)

    headers = [f"P{p.index}:" for p in test.processes]
    nrows = max(len(c) for c in columns) if columns else 0
    widths = [max([len(headers[k])] + [len(c) for c in columns[k]])
              for k in range(len(columns))]
    rows = [headers] + [
        [columns[k][r] if r < len(columns[k]) else "" for k in range(len(columns))]
        for r in range(nrows)
    ]
    for row in rows:
        out.append(" " + " | ".join(cell.ljust(widths[k])
                                    for k, cell in enumerate(row)) + " ;")

    out.append(f"{test.condition.quantifier} ({format_cond(test.condition.body)})")
    return "\n".join(out) + "\n"
