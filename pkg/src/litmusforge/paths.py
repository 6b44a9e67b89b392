"""Bounded unrolling of LISA processes into symbolic control paths.

A process is a straight list of instructions plus labels; branches make
its control flow a graph.  `unroll` enumerates every terminating walk
through that graph in which each backward control transfer (a taken
backward branch, or a backward jump) is executed at most `bound` times.
Walks still inside a loop when the cap hits are discarded and counted.

Along each walk, register dataflow is resolved symbolically: every read
introduces a fresh `PythiaVar` standing for whatever value the read will
eventually observe, and registers hold expressions over those variables.
Writes record their value expression, conditional branches record a
constraint (the guard expression must equal 1 on the taken arm, 0 on the
fall-through arm), `mov` updates registers without emitting an event,
and `j` transfers control without emitting anything.

The result is a set of `ProcessPath` objects: po-ordered event lists
whose read values are still open.  Choosing one path per process and a
read-from assignment for the pythia variables is the job of the
enumeration layer; nothing here inspects other processes.
"""

from __future__ import annotations

from collections.abc import Callable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field

from .litmus import (
    Binop,
    Branch,
    Const,
    Expr,
    Fence,
    Jump,
    LitmusError,
    Mov,
    Process,
    Read,
    Reg,
    Unop,
    Write,
    apply_binop,
    format_expr,
)

DEFAULT_PATH_CEILING = 10_000


class UnrollBudgetError(LitmusError):
    """Raised when a process has more control paths than the ceiling."""


@dataclass(frozen=True)
class PythiaVar(Expr):
    """The symbolic value observed by one read event.

    `proc` and `po` identify the read: it is the `po`-th event of the
    chosen path of process `proc`.  Distinct reads along one path get
    distinct variables, including repeated unrollings of the same
    instruction.
    """

    proc: int
    po: int


@dataclass(frozen=True)
class PathEvent:
    """One memory-system event on a control path.

    kind is "W", "R", "F" or "B".  `po` is the event's position in the
    path's event list.  Reads carry their own PythiaVar as `value`;
    writes carry an expression over po-earlier PythiaVars; fences and
    branch events carry neither value nor location.
    """

    proc: int
    po: int
    kind: str
    annotations: tuple[str, ...] = ()
    location: str | None = None
    value: Expr | None = None


@dataclass(frozen=True)
class PathConstraint:
    """A branch decision: `expr` must evaluate to `value` (1 or 0).

    `po` is the position of the B event the decision belongs to.
    """

    expr: Expr
    value: int
    po: int


@dataclass(frozen=True)
class ProcessPath:
    """One terminating control path of one process.

    `events` is the path's program order.  `constraints` lists branch
    decisions in po order.  `final_regs` gives the symbolic value of
    every register at the end of the path, sorted by register name.
    """

    proc: int
    events: tuple[PathEvent, ...]
    constraints: tuple[PathConstraint, ...]
    final_regs: tuple[tuple[str, Expr], ...]

    def reads(self) -> tuple[PathEvent, ...]:
        return tuple(e for e in self.events if e.kind == "R")

    def writes(self) -> tuple[PathEvent, ...]:
        return tuple(e for e in self.events if e.kind == "W")


@dataclass(frozen=True)
class UnrollResult(Sequence):
    """The paths of one process plus unrolling statistics.

    Behaves as a sequence of ProcessPath.  `discarded` counts walks
    killed at the backward-transfer cap; `truncated` is set when the
    path ceiling was hit in partial mode (the listing is incomplete).
    """

    paths: tuple[ProcessPath, ...]
    discarded: int = 0
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.paths)

    def __getitem__(self, i):
        return self.paths[i]

    def __iter__(self) -> Iterator[ProcessPath]:
        return iter(self.paths)


def substitute(expr: Expr, regs: Mapping[str, Expr]) -> Expr:
    """Replace registers with their current symbolic values, folding
    any subexpression whose operands are all constants."""
    if isinstance(expr, (Const, PythiaVar)):
        return expr
    if isinstance(expr, Reg):
        return regs.get(expr.name, Const(0))
    if isinstance(expr, Unop):
        arg = substitute(expr.arg, regs)
        if expr.op != "sub":
            raise LitmusError(f"unknown unary operator {expr.op!r}")
        if isinstance(arg, Const):
            return Const(-arg.value)
        return Unop(expr.op, arg)
    if isinstance(expr, Binop):
        left = substitute(expr.left, regs)
        right = substitute(expr.right, regs)
        if isinstance(left, Const) and isinstance(right, Const):
            return Const(apply_binop(expr.op, left.value, right.value))
        return Binop(expr.op, left, right)
    raise LitmusError(f"not an expression: {expr!r}")


def eval_sym(expr: Expr, lookup: Callable[[PythiaVar], int | None]) -> int | None:
    """Evaluate an expression over PythiaVars; strict in unknowns.

    `lookup` returns the value bound to a variable or None.  The result
    is None as soon as any leaf is unknown.
    """
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, PythiaVar):
        return lookup(expr)
    if isinstance(expr, Unop):
        v = eval_sym(expr.arg, lookup)
        return None if v is None else -v
    if isinstance(expr, Binop):
        a = eval_sym(expr.left, lookup)
        if a is None:
            return None
        b = eval_sym(expr.right, lookup)
        if b is None:
            return None
        return apply_binop(expr.op, a, b)
    raise LitmusError(f"not a symbolic expression: {expr!r}")


def format_sym(expr: Expr) -> str:
    """Render a symbolic expression; PythiaVars print as p<proc>.<po>."""
    if isinstance(expr, PythiaVar):
        return f"p{expr.proc}.{expr.po}"
    if isinstance(expr, Unop):
        return f"({expr.op} {format_sym(expr.arg)})"
    if isinstance(expr, Binop):
        return f"({expr.op} {format_sym(expr.left)} {format_sym(expr.right)})"
    return format_expr(expr)


def pythia_vars(expr: Expr) -> frozenset[PythiaVar]:
    if isinstance(expr, PythiaVar):
        return frozenset((expr,))
    if isinstance(expr, Unop):
        return pythia_vars(expr.arg)
    if isinstance(expr, Binop):
        return pythia_vars(expr.left) | pythia_vars(expr.right)
    return frozenset()


@dataclass
class _Walk:
    """Mutable in-progress control path."""

    pc: int
    regs: dict[str, Expr]
    events: list[PathEvent]
    constraints: list[PathConstraint]
    back_counts: dict[int, int] = field(default_factory=dict)

    def fork(self) -> "_Walk":
        return _Walk(
            self.pc,
            dict(self.regs),
            list(self.events),
            list(self.constraints),
            dict(self.back_counts),
        )


def unroll(
    process: Process,
    bound: int,
    ceiling: int = DEFAULT_PATH_CEILING,
    partial: bool = False,
) -> UnrollResult:
    """Enumerate the terminating control paths of one process.

    Each backward control transfer may execute at most `bound` times
    per path; walks exceeding the cap are dropped and counted in
    `UnrollResult.discarded`.  More than `ceiling` complete paths raises
    UnrollBudgetError, or truncates the listing when `partial` is set.

    Paths come out in a fixed order: depth-first, fall-through before
    taken at every branch.
    """
    if bound < 1:
        raise ValueError(f"unroll bound must be >= 1, got {bound}")
    code = process.instructions
    targets: dict[int, int] = {}
    for idx, ins in enumerate(code):
        if isinstance(ins, (Branch, Jump)):
            t = process.label_index(ins.target)
            if t is None:
                raise LitmusError(
                    f"unresolved label {ins.target} in process P{process.index}"
                )
            targets[idx] = t

    init_regs = {r: Const(0) for r in process.registers()}
    paths: list[ProcessPath] = []
    discarded = 0
    truncated = False
    stack = [_Walk(0, init_regs, [], [])]

    while stack:
        walk = stack.pop()
        dead = False
        while walk.pc < len(code):
            pc = walk.pc
            ins = code[pc]
            if isinstance(ins, Read):
                pv = PythiaVar(process.index, len(walk.events))
                walk.events.append(
                    PathEvent(
                        process.index,
                        pv.po,
                        "R",
                        ins.annotations,
                        ins.location,
                        pv,
                    )
                )
                walk.regs[ins.register] = pv
                walk.pc = pc + 1
            elif isinstance(ins, Write):
                walk.events.append(
                    PathEvent(
                        process.index,
                        len(walk.events),
                        "W",
                        ins.annotations,
                        ins.location,
                        substitute(ins.value, walk.regs),
                    )
                )
                walk.pc = pc + 1
            elif isinstance(ins, Fence):
                walk.events.append(
                    PathEvent(process.index, len(walk.events), "F", ins.annotations)
                )
                walk.pc = pc + 1
            elif isinstance(ins, Mov):
                walk.regs[ins.register] = substitute(ins.value, walk.regs)
                walk.pc = pc + 1
            elif isinstance(ins, Jump):
                target = targets[pc]
                if target <= pc:
                    n = walk.back_counts.get(pc, 0) + 1
                    if n > bound:
                        discarded += 1
                        dead = True
                        break
                    walk.back_counts[pc] = n
                walk.pc = target
            elif isinstance(ins, Branch):
                guard = walk.regs.get(ins.register, Const(0))
                po = len(walk.events)
                walk.events.append(
                    PathEvent(process.index, po, "B", ins.annotations)
                )
                target = targets[pc]
                taken = walk.fork()
                taken.constraints.append(PathConstraint(guard, 1, po))
                if target <= pc:
                    n = taken.back_counts.get(pc, 0) + 1
                    if n > bound:
                        discarded += 1
                    else:
                        taken.back_counts[pc] = n
                        taken.pc = target
                        stack.append(taken)
                else:
                    taken.pc = target
                    stack.append(taken)
                walk.constraints.append(PathConstraint(guard, 0, po))
                walk.pc = pc + 1
            else:
                raise LitmusError(f"unknown instruction: {ins!r}")
        if dead:
            continue
        if len(paths) >= ceiling:
            if partial:
                truncated = True
                break
            raise UnrollBudgetError(
                f"unroll budget exceeded for process P{process.index}: "
                f"more than {ceiling} paths"
            )
        paths.append(
            ProcessPath(
                process.index,
                tuple(walk.events),
                tuple(walk.constraints),
                tuple(sorted(walk.regs.items())),
            )
        )

    return UnrollResult(tuple(paths), discarded, truncated)


def program_order(paths: Sequence[ProcessPath]) -> frozenset[tuple[PathEvent, PathEvent]]:
    """The po relation of one path per process: the union of each
    path's strict total event order.  No cross-process pairs."""
    procs = [p.proc for p in paths]
    if len(set(procs)) != len(procs):
        raise ValueError("program_order wants one path per process")
    pairs = set()
    for path in paths:
        evs = path.events
        for i, a in enumerate(evs):
            for b in evs[i + 1 :]:
                pairs.add((a, b))
    return frozenset(pairs)
