"""Bounded unrolling: path shapes, budgets, pythia variables."""

import pytest

from litmusforge.litmus import Const, parse_litmus, validate
from litmusforge.paths import (
    PythiaVar,
    UnrollBudgetError,
    eval_sym,
    format_sym,
    program_order,
    pythia_vars,
    substitute,
    unroll,
)


def proc_of(body: str):
    """One-process test around `body` (instruction lines, one per row)."""
    rows = "".join(f" {line} ;\n" for line in body.strip().splitlines())
    text = f"LISA t\n{{ x = 0; y = 0; }}\n P0: ;\n{rows}exists (x=0)\n"
    return validate(parse_litmus(text)).processes[0]


def test_straight_line_single_path():
    proc = proc_of("w[] x 1\nr[] r1 x\nf[rel]")
    result = unroll(proc, 2)
    assert len(result) == 1 and result.discarded == 0 and not result.truncated
    path = result[0]
    assert [e.kind for e in path.events] == ["W", "R", "F"]
    assert [e.po for e in path.events] == [0, 1, 2]
    assert path.events[0].value == Const(1)
    assert path.events[1].value == PythiaVar(0, 1)
    assert path.events[2].annotations == ("rel",)
    assert path.constraints == ()
    assert dict(path.final_regs)["r1"] == PythiaVar(0, 1)


def test_read_feeds_later_write():
    proc = proc_of("r[] r1 x\nw[] y (add r1 1)")
    path = unroll(proc, 2)[0]
    write = path.events[1]
    assert pythia_vars(write.value) == {PythiaVar(0, 0)}
    assert eval_sym(write.value, {PythiaVar(0, 0): 4}.get) == 5
    assert format_sym(write.value) == "(add p0.0 1)"


def test_forward_branch_two_paths():
    proc = proc_of("r[] r1 x\nb[] r1 LE\nw[] y 1\nLE: f[]")
    result = unroll(proc, 2)
    assert len(result) == 2
    fall, taken = result
    # fall-through explored first: branch not taken, the write happens
    assert [e.kind for e in fall.events] == ["R", "B", "W", "F"]
    assert [(c.value, format_sym(c.expr)) for c in fall.constraints] == [(0, "p0.0")]
    assert [e.kind for e in taken.events] == ["R", "B", "F"]
    assert [(c.value, format_sym(c.expr)) for c in taken.constraints] == [(1, "p0.0")]


def test_forward_branches_multiply():
    # k independent branches, each over a fresh read: 2^k paths
    for k in (1, 2, 3, 4):
        lines = []
        for i in range(k):
            lines.append(f"r[] r{i} x")
            lines.append(f"b[] r{i} L{i}")
            lines.append(f"L{i}: f[]")
        result = unroll(proc_of("\n".join(lines)), 2)
        assert len(result) == 2 ** k


def test_spin_loop_bound_counts_iterations():
    proc = proc_of("L0: r[] r1 x\nb[] r1 L0")
    for bound in (1, 2, 3):
        result = unroll(proc, bound)
        # one path per number of taken iterations, 0..bound
        assert len(result) == bound + 1
        assert result.discarded == 1
        longest = max(result, key=lambda p: len(p.events))
        assert len(longest.events) == 2 * (bound + 1)
    # every completed path ends on the not-taken side of the loop branch
    for path in unroll(proc, 2):
        assert path.constraints[-1].value == 0


def test_spin_loop_distinct_variables_per_iteration():
    proc = proc_of("L0: r[] r1 x\nb[] r1 L0")
    longest = max(unroll(proc, 2), key=lambda p: len(p.events))
    reads = [e for e in longest.events if e.kind == "R"]
    assert len({e.value for e in reads}) == len(reads)


def test_constraints_reference_earlier_events_only():
    proc = proc_of("L0: r[] r1 x\nr[] r2 y\nmov r3 (and r1 r2)\nb[] r3 L0")
    for path in unroll(proc, 2):
        for c in path.constraints:
            assert all(v.po < c.po for v in pythia_vars(c.expr))
        for e in path.events:
            if e.kind == "W":
                assert all(v.po < e.po for v in pythia_vars(e.value))


def test_infinite_jump_never_completes():
    proc = proc_of("L0: j L0")
    result = unroll(proc, 3)
    assert len(result) == 0
    assert result.discarded == 1


def test_jump_emits_no_event():
    proc = proc_of("j LE\nw[] x 1\nLE: w[] y 1")
    paths = unroll(proc, 2)
    assert len(paths) == 1
    assert [(e.kind, e.location) for e in paths[0].events] == [("W", "y")]


def test_ceiling_raises_and_partial_truncates():
    # 5 forward branches: 32 paths, over a ceiling of 10
    lines = []
    for i in range(5):
        lines.append(f"r[] r{i} x")
        lines.append(f"b[] r{i} L{i}")
        lines.append(f"L{i}: f[]")
    proc = proc_of("\n".join(lines))
    with pytest.raises(UnrollBudgetError) as err:
        unroll(proc, 2, ceiling=10)
    assert "P0" in str(err.value)
    result = unroll(proc, 2, ceiling=10, partial=True)
    assert result.truncated and len(result) == 10


def test_unroll_deterministic(corpus):
    for test in corpus.values():
        for proc in test.processes:
            assert unroll(proc, 2) == unroll(proc, 2)


def test_peterson_paths(corpus):
    p0 = corpus["peterson"].processes[0]
    assert [len(p.events) for p in unroll(p0, 1)] == [7, 10]
    assert [len(p.events) for p in unroll(p0, 2)] == [7, 10, 13]
    assert unroll(p0, 2).discarded == 1


def test_program_order():
    procs = [proc_of("w[] x 1\nr[] r1 x\nf[]")]
    po = program_order([unroll(p, 2)[0] for p in procs])
    events = unroll(procs[0], 2)[0].events
    assert (events[0], events[1]) in po
    assert (events[0], events[2]) in po
    assert (events[1], events[2]) in po
    assert len(po) == 3
    with pytest.raises(ValueError):
        program_order([unroll(procs[0], 2)[0], unroll(procs[0], 2)[0]])


def test_substitute_folds_constants():
    from litmusforge.litmus import Binop, Reg

    e = Binop("add", Reg("r1"), Const(2))
    assert substitute(e, {"r1": Const(3)}) == Const(5)
    assert substitute(e, {}) == Const(2)  # unset register reads 0
    sym = substitute(e, {"r1": PythiaVar(0, 0)})
    assert sym == Binop("add", PythiaVar(0, 0), Const(2))


def test_eval_sym_is_strict():
    e = PythiaVar(1, 4)
    assert eval_sym(e, {e: 7}.get) == 7
    assert eval_sym(e, {}.get) is None
    from litmusforge.litmus import Binop

    both = Binop("add", PythiaVar(0, 0), PythiaVar(0, 1))
    assert eval_sym(both, {PythiaVar(0, 0): 1}.get) is None
