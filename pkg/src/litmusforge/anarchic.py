"""Candidate-execution enumeration under the anarchic semantics.

The anarchic semantics puts no restriction on communication: a read may
observe any write to the same location, from any process, regardless of
program order, and the coherence order may arrange each location's
writes arbitrarily (initial write first).  A candidate execution is one
choice of control path per process, one read-from source per read, and
one coherence order per location, such that the values induced by the
read-from choice actually drive each chosen path the way it branched.

Value resolution follows a fixpoint rule: a read's value is its source
write's expression evaluated under already-known values, iterated until
stable.  Assignments that leave a pythia variable undetermined (a value
cycle feeding itself) are rejected, as are assignments violating any
branch constraint.  `solve_values` states that rule directly; the
streaming enumerator reaches the same answers with an incremental
backtracking search that prunes on the first violated constraint.

Events get dense integer ids: initial writes first (one per location,
in sorted location order), then each process's path events in program
order.  All relations are sets of id pairs over one candidate's events.
"""

from __future__ import annotations

import itertools
import json
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from typing import IO

from .litmus import Const, LitmusTest
from .paths import (
    DEFAULT_PATH_CEILING,
    PathEvent,
    ProcessPath,
    PythiaVar,
    UnrollResult,
    eval_sym,
    pythia_vars,
    unroll,
)

INIT = -1  # the proc id of initial writes


class _Reject:
    """Singleton returned by solve_values for unsolvable assignments."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "REJECT"

    def __bool__(self) -> bool:
        return False


REJECT = _Reject()


@dataclass(frozen=True)
class Event:
    """A ground event of one candidate execution.

    `id` indexes the candidate's event tuple.  Initial writes have
    proc == INIT and po 0.  Fence and branch events carry no location
    and no value.
    """

    id: int
    proc: int
    po: int
    kind: str  # "W" "R" "F" "B" "IW"
    location: str | None = None
    value: int | None = None
    annotations: tuple[str, ...] = ()

    def label(self) -> str:
        if self.kind == "IW":
            return f"init:{self.location}"
        return f"{self.proc}:{self.po}"


@dataclass(frozen=True)
class CandidateExecution:
    """One fully ground candidate: events plus po, rf and co over ids.

    `chosen_paths` records which unrolled path each process took, and
    `final_regs` maps (proc, register) to the register's final value.
    """

    events: tuple[Event, ...]
    po: frozenset[tuple[int, int]]
    rf: frozenset[tuple[int, int]]  # (write id, read id)
    co: frozenset[tuple[int, int]]
    chosen_paths: tuple[int, ...]
    final_regs: tuple[tuple[tuple[int, str], int], ...]

    @property
    def fr(self) -> frozenset[tuple[int, int]]:
        """Derived from-read relation: rf inverted, then co."""
        succ: dict[int, list[int]] = {}
        for a, b in self.co:
            succ.setdefault(a, []).append(b)
        return frozenset(
            (r, b) for w, r in self.rf for b in succ.get(w, ())
        )

    def final_reg(self, proc: int, register: str) -> int:
        for key, v in self.final_regs:
            if key == (proc, register):
                return v
        return 0

    def location_values(self) -> dict[str, int]:
        """Final memory: per location, the co-maximal write's value.

        Since co totally orders each location's writes, the co-maximal
        write is the one with no outgoing co edge."""
        sources = {a for a, _ in self.co}
        return {
            e.location: e.value
            for e in self.events
            if e.kind in ("W", "IW") and e.id not in sources
        }


def initial_writes(test: LitmusTest) -> tuple[Event, ...]:
    """One IW event per location the test mentions, ids 0..n-1 in
    sorted location order, valued from the prelude (default 0)."""
    return tuple(
        Event(i, INIT, 0, "IW", loc, test.initial_value(loc))
        for i, loc in enumerate(sorted(test.locations()))
    )


def enumerate_rf(events: Sequence) -> Iterator[dict]:
    """Every total read-from assignment over the given events.

    `events` mixes initial-write and path events (anything with `kind`
    and `location` attributes).  Each read is mapped to some write or
    initial write of the same location, with no ordering restriction.
    Assignments come out in product order: reads in input order, each
    cycling through its candidate writes in input order.
    """
    reads = [e for e in events if e.kind == "R"]
    writes: dict[str, list] = {}
    for e in events:
        if e.kind in ("W", "IW"):
            writes.setdefault(e.location, []).append(e)
    cands = [writes.get(r.location, []) for r in reads]
    for srcs in itertools.product(*cands):
        yield dict(zip(reads, srcs))


def solve_values(
    paths: Sequence[ProcessPath], rf: Mapping
) -> dict[PythiaVar, int] | _Reject:
    """Ground every pythia variable under one rf assignment, or REJECT.

    `rf` maps each read PathEvent to its source: a write PathEvent or
    an initial-write Event.  Values are computed as a least fixpoint
    (at most one round per read); an assignment is rejected when some
    variable stays undetermined (a self-feeding value cycle) or when a
    branch constraint of any path evaluates to the wrong side.
    """
    reads = [e for p in paths for e in p.events if e.kind == "R"]
    val: dict[PythiaVar, int] = {}
    for _ in range(len(reads) + 1):
        changed = False
        for e in reads:
            if e.value in val:
                continue
            src = rf[e]
            if isinstance(src, PathEvent):
                v = eval_sym(src.value, val.get)
            else:
                v = src.value
            if v is not None:
                val[e.value] = v
                changed = True
        if not changed:
            break
    if len(val) != len(reads):
        return REJECT
    for p in paths:
        for c in p.constraints:
            if eval_sym(c.expr, val.get) != c.value:
                return REJECT
    return val


def enumerate_co(events: Sequence) -> Iterator[frozenset]:
    """Every coherence order over the given events' writes: the union,
    across locations, of a strict total order with the initial write
    first.  Yields frozensets of (earlier, later) event pairs."""
    by_loc: dict[str, list] = {}
    iw: dict[str, object] = {}
    for e in events:
        if e.kind == "W":
            by_loc.setdefault(e.location, []).append(e)
        elif e.kind == "IW":
            iw[e.location] = e
            by_loc.setdefault(e.location, [])
    per_loc = []
    for loc in sorted(by_loc):
        chains = []
        prefix = (iw[loc],) if loc in iw else ()
        for perm in itertools.permutations(by_loc[loc]):
            chain = prefix + perm
            chains.append(
                frozenset(
                    (chain[i], chain[j])
                    for i in range(len(chain))
                    for j in range(i + 1, len(chain))
                )
            )
        per_loc.append(chains)
    for parts in itertools.product(*per_loc):
        yield frozenset().union(*parts) if parts else frozenset()


# ---------------------------------------------------------------------------
# Streaming enumeration


@dataclass(frozen=True)
class CoVariant:
    """One coherence order of a path combination, precomputed.

    `pairs` is the full relation; `succ` maps a write id to its co
    successors (transitively); `comax` maps each location to its last
    write's id.
    """

    index: int
    pairs: tuple[tuple[int, int], ...]
    succ: dict[int, tuple[int, ...]]
    comax: dict[str, int]


class ComboContext:
    """Static data for one path combination: the event skeleton, read
    candidates, constraints indexed by variable, and all co variants.

    The solver mutates `val` (pythia values by read id) and `src`
    (current rf source by read id) in place while backtracking; a
    consumer must finish with a candidate before advancing the stream.
    """

    def __init__(self, test: LitmusTest, combo: tuple[int, ...],
                 paths: Sequence[ProcessPath]):
        self.test = test
        self.combo = combo
        self.paths = tuple(paths)
        self.locations = sorted(test.locations())
        self.n_iw = len(self.locations)
        self.iw_id = {loc: i for i, loc in enumerate(self.locations)}
        self.iw_value = [test.initial_value(loc) for loc in self.locations]

        self.base: dict[int, int] = {}
        self.static_events: list[tuple] = [
            (INIT, 0, "IW", loc, (), None) for loc in self.locations
        ]
        nid = self.n_iw
        for path in self.paths:
            self.base[path.proc] = nid
            for e in path.events:
                self.static_events.append(
                    (e.proc, e.po, e.kind, e.location, e.annotations, e.value)
                )
            nid += len(path.events)
        self.n_events = nid

        writes_by_loc: dict[str, list[int]] = {
            loc: [self.iw_id[loc]] for loc in self.locations
        }
        self.read_ids: list[int] = []
        for path in self.paths:
            b = self.base[path.proc]
            for e in path.events:
                if e.kind == "R":
                    self.read_ids.append(b + e.po)
                elif e.kind == "W":
                    writes_by_loc[e.location].append(b + e.po)
        self.writes_by_loc = writes_by_loc
        self.read_cands = [
            writes_by_loc[self.static_events[r][3]] for r in self.read_ids
        ]

        # write expressions, pre-resolved to (const value, var ids, expr)
        self.wexpr: dict[int, tuple[int | None, tuple[int, ...], object]] = {}
        for path in self.paths:
            b = self.base[path.proc]
            for e in path.events:
                if e.kind != "W":
                    continue
                if isinstance(e.value, Const):
                    self.wexpr[b + e.po] = (e.value.value, (), e.value)
                else:
                    vids = tuple(
                        self.var_id(p) for p in _sorted_vars(e.value)
                    )
                    self.wexpr[b + e.po] = (None, vids, e.value)

        # constraints as (expr, required, var ids); constant ones are
        # settled here and may make the whole combination infeasible
        self.constraints: list[tuple[object, int, tuple[int, ...]]] = []
        self.feasible = True
        self.var_constraints: dict[int, list[int]] = {}
        for path in self.paths:
            for c in path.constraints:
                vids = tuple(self.var_id(p) for p in _sorted_vars(c.expr))
                if not vids:
                    if eval_sym(c.expr, lambda _: None) != c.value:
                        self.feasible = False
                    continue
                ci = len(self.constraints)
                self.constraints.append((c.expr, c.value, vids))
                for v in vids:
                    self.var_constraints.setdefault(v, []).append(ci)

        # final register expressions, by (proc, register)
        self.final_reg_exprs: dict[tuple[int, str], object] = {}
        for path in self.paths:
            for name, expr in path.final_regs:
                self.final_reg_exprs[(path.proc, name)] = expr

        self.po_edges: list[tuple[int, int]] = []
        for path in self.paths:
            b = self.base[path.proc]
            for i in range(len(path.events) - 1):
                self.po_edges.append((b + i, b + i + 1))

        self.variants = self._co_variants()
        self._po_pairs: frozenset[tuple[int, int]] | None = None

        # live solver state
        self.val: list[int | None] = [None] * self.n_events
        self.src: list[int] = [0] * self.n_events
        self._pend: list[int] = []
        self._watch: dict[int, list[int]] = {}
        self._trail: list[tuple[str, int]] = []
        self._marks: list[int] = []
        self._unground = 0

    def var_id(self, p: PythiaVar) -> int:
        return self.base[p.proc] + p.po

    def _lookup(self, p: PythiaVar) -> int | None:
        return self.val[self.base[p.proc] + p.po]

    def _co_variants(self) -> list[CoVariant]:
        per_loc = []
        for loc in self.locations:
            ws = self.writes_by_loc[loc]
            per_loc.append(
                [(ws[0],) + perm for perm in itertools.permutations(ws[1:])]
            )
        variants = []
        for chains in itertools.product(*per_loc):
            pairs = []
            succ: dict[int, tuple[int, ...]] = {}
            comax: dict[str, int] = {}
            for loc, chain in zip(self.locations, chains):
                comax[loc] = chain[-1]
                for i, w in enumerate(chain):
                    succ[w] = chain[i + 1 :]
                    for w2 in chain[i + 1 :]:
                        pairs.append((w, w2))
            variants.append(CoVariant(len(variants), tuple(pairs), succ, comax))
        return variants

    # -- incremental solving ------------------------------------------------

    def _ground(self, rid: int, value: int) -> bool:
        queue = [(rid, value)]
        while queue:
            x, v = queue.pop()
            if self.val[x] is not None:
                continue
            self.val[x] = v
            self._unground -= 1
            self._trail.append(("val", x))
            for ci in self.var_constraints.get(x, ()):
                self._pend[ci] -= 1
                self._trail.append(("pend", ci))
                if self._pend[ci] == 0:
                    expr, req, _ = self.constraints[ci]
                    if eval_sym(expr, self._lookup) != req:
                        return False
            for dr in self._watch.get(x, ()):
                if self.val[dr] is None:
                    _, _, expr = self.wexpr[self.src[dr]]
                    v2 = eval_sym(expr, self._lookup)
                    if v2 is not None:
                        queue.append((dr, v2))
        return True

    def _assign(self, level: int, wid: int) -> bool:
        self._marks.append(len(self._trail))
        rid = self.read_ids[level]
        self.src[rid] = wid
        if wid < self.n_iw:
            return self._ground(rid, self.iw_value[wid])
        const, vids, expr = self.wexpr[wid]
        if const is not None:
            return self._ground(rid, const)
        unknown = [v for v in vids if self.val[v] is None]
        if not unknown:
            return self._ground(rid, eval_sym(expr, self._lookup))
        for v in unknown:
            self._watch.setdefault(v, []).append(rid)
            self._trail.append(("watch", v))
        return True

    def _undo(self) -> None:
        mark = self._marks.pop()
        while len(self._trail) > mark:
            tag, x = self._trail.pop()
            if tag == "val":
                self.val[x] = None
                self._unground += 1
            elif tag == "pend":
                self._pend[x] += 1
            else:
                self._watch[x].pop()

    def leaves(self) -> Iterator[None]:
        """Drive the backtracking search; yields once per surviving rf
        assignment, with `val` and `src` set for that leaf."""
        if not self.feasible:
            return
        n = len(self.read_ids)
        self._pend = [len(vids) for _, _, vids in self.constraints]
        self._unground = n
        if n == 0:
            yield None
            return
        cands = self.read_cands
        pos = [0] * n
        level = 0
        while True:
            if pos[level] >= len(cands[level]):
                level -= 1
                if level < 0:
                    return
                self._undo()
                pos[level] += 1
                continue
            if self._assign(level, cands[level][pos[level]]):
                if level == n - 1:
                    if self._unground == 0:
                        yield None
                    self._undo()
                    pos[level] += 1
                else:
                    level += 1
                    pos[level] = 0
            else:
                self._undo()
                pos[level] += 1

    # -- leaf accessors ------------------------------------------------------

    def write_value(self, wid: int) -> int:
        if wid < self.n_iw:
            return self.iw_value[wid]
        const, _, expr = self.wexpr[wid]
        if const is not None:
            return const
        return eval_sym(expr, self._lookup)

    def reg_value(self, proc: int, register: str) -> int:
        expr = self.final_reg_exprs.get((proc, register))
        if expr is None:
            return 0
        return eval_sym(expr, self._lookup)

    def po_pairs(self) -> frozenset[tuple[int, int]]:
        if self._po_pairs is None:
            self._po_pairs = frozenset(
                (self.base[p.proc] + i, self.base[p.proc] + j)
                for p in self.paths
                for i in range(len(p.events))
                for j in range(i + 1, len(p.events))
            )
        return self._po_pairs

    def realize(self, covar: CoVariant) -> CandidateExecution:
        """Materialize the current leaf plus one co variant."""
        events = []
        for i, (proc, po, kind, loc, ann, _) in enumerate(self.static_events):
            if kind in ("W", "IW"):
                value = self.write_value(i)
            elif kind == "R":
                value = self.val[i]
            else:
                value = None
            events.append(Event(i, proc, po, kind, loc, value, ann))
        rf = frozenset((self.src[r], r) for r in self.read_ids)
        final_regs = tuple(
            sorted(
                (key, eval_sym(expr, self._lookup))
                for key, expr in self.final_reg_exprs.items()
            )
        )
        return CandidateExecution(
            tuple(events),
            self.po_pairs(),
            rf,
            frozenset(covar.pairs),
            self.combo,
            final_regs,
        )


def _sorted_vars(expr) -> list[PythiaVar]:
    return sorted(pythia_vars(expr), key=lambda p: (p.proc, p.po))


def raw_candidates(
    test: LitmusTest, unrolled: Sequence[UnrollResult]
) -> Iterator[tuple[ComboContext, CoVariant]]:
    """The streaming core: yields (context, co variant) once per
    candidate, in deterministic order (path combinations, then rf
    assignments, then co variants).  The context's `val` and `src`
    arrays describe the current rf leaf and are reused across leaves;
    consumers needing a persistent record must call `realize`."""
    for combo in itertools.product(*[range(len(u)) for u in unrolled]):
        ctx = ComboContext(
            test, combo, [unrolled[p][i] for p, i in enumerate(combo)]
        )
        for _ in ctx.leaves():
            for covar in ctx.variants:
                yield ctx, covar


def candidate_executions(
    test: LitmusTest,
    bound: int,
    ceiling: int = DEFAULT_PATH_CEILING,
    partial: bool = False,
) -> Iterator[CandidateExecution]:
    """Enumerate every candidate execution of `test` with each backward
    branch taken at most `bound` times.  Deterministic order; raises
    UnrollBudgetError if some process has more than `ceiling` paths
    (truncates instead when `partial` is set)."""
    unrolled = [unroll(p, bound, ceiling, partial) for p in test.processes]
    for ctx, covar in raw_candidates(test, unrolled):
        yield ctx.realize(covar)


def dump_candidates(candidates: Iterable[CandidateExecution], fh: IO[str]) -> int:
    """Write candidates as line-delimited JSON; returns the count."""
    n = 0
    for c in candidates:
        obj = {
            "chosen_paths": list(c.chosen_paths),
            "events": [
                {
                    "id": e.id,
                    "label": e.label(),
                    "proc": e.proc,
                    "po": e.po,
                    "kind": e.kind,
                    "loc": e.location,
                    "value": e.value,
                    "annotations": list(e.annotations),
                }
                for e in c.events
            ],
            "rf": sorted(map(list, c.rf)),
            "co": sorted(map(list, c.co)),
            "final_regs": [
                [f"{p}:{r}", v] for (p, r), v in c.final_regs
            ],
        }
        fh.write(json.dumps(obj, separators=(",", ":")) + "\n")
        n += 1
    return n
