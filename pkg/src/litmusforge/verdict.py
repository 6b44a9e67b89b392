"""Verdicts: run one test against one model and fold the outcomes.

`run` enumerates every candidate execution, keeps those the model
allows, folds them into a set of observable final states (the registers
the final condition mentions plus every shared location), and judges
the condition: `exists` holds iff some allowed candidate satisfies the
body, `~exists` iff none does, `forall` iff all do.

The checks of the shipped models are all of the form `acyclic t1 | t2
| ...` where each union term is either independent of rf and co or is
exactly `rf`, `rf & ext`, `co` or `fr`.  For such models the driver
compiles a plan: per path combination it evaluates the independent
terms once and transitively reduces them, then per candidate it splices
in the read-from and coherence edges and runs a direct depth-first
cycle check, skipping whole groups of candidates when a prefix of the
edge set is already cyclic.  Any other model is checked by evaluating
its statements per candidate; same verdicts, more time.

`render_text` produces the fixed plain-text report (one block per
test), `to_json` a dict with the same content, and `write_dot` a
Graphviz graph of one witness execution.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass

from .anarchic import CandidateExecution, ComboContext, raw_candidates
from .cat import (
    REL,
    Base,
    CatModel,
    Inter,
    Let,
    RelExpr,
    Union,
    eval_rel,
    has_cycle,
)
from .cat import check as cat_check
from .litmus import LitmusTest, RegAtom, cond_atoms, eval_cond, format_cond
from .paths import DEFAULT_PATH_CEILING, unroll

# ---------------------------------------------------------------------------
# Final states


@dataclass(frozen=True)
class FinalState:
    """Observable outcome of one candidate: final register values (as
    ((proc, register), value) pairs) and final memory per location."""

    regs: tuple[tuple[tuple[int, str], int], ...]
    locs: tuple[tuple[str, int], ...]

    def render(self) -> str:
        parts = [f"{p}:{r}={v};" for (p, r), v in self.regs]
        parts += [f"{loc}={v};" for loc, v in self.locs]
        return " ".join(parts)


def final_state(
    candidate: CandidateExecution,
    observables: tuple[Sequence[tuple[int, str]], Sequence[str]] | None = None,
) -> FinalState:
    """Project a candidate onto its observable final state.

    Register values come from the chosen path's terminal register
    valuation, memory from each location's co-maximal write.
    `observables` narrows the projection to ((proc, register) keys,
    locations); by default every final register and location appears.
    """
    mem = candidate.location_values()
    if observables is None:
        regs = candidate.final_regs
        locs = tuple(sorted(mem.items()))
    else:
        reg_keys, loc_names = observables
        regs = tuple((k, candidate.final_reg(*k)) for k in reg_keys)
        locs = tuple((loc, mem[loc]) for loc in loc_names)
    return FinalState(regs, locs)


# ---------------------------------------------------------------------------
# Verdicts


@dataclass(frozen=True)
class Verdict:
    """Outcome of running one test against one model.

    `states` pairs each observable final state of an allowed candidate
    with the number of allowed candidates reaching it.  `positive` and
    `negative` count allowed candidates by whether they satisfy the
    condition body.  A verdict is bounded when the unroll bound
    discarded prefixes or the path ceiling truncated enumeration; the
    reported sets are then lower approximations.
    """

    test: str
    model: str
    condition: str
    states: tuple[tuple[FinalState, int], ...]
    ok: bool
    positive: int
    negative: int
    enumerated: int
    allowed: int
    forbidden: int
    discarded_paths: int
    truncated: bool

    @property
    def result(self) -> str:
        return "Ok" if self.ok else "No"

    @property
    def bounded(self) -> bool:
        return self.discarded_paths > 0 or self.truncated

    @property
    def observation(self) -> str:
        if self.positive == 0:
            return "Never"
        return "Always" if self.negative == 0 else "Sometimes"


def _observables(test: LitmusTest) -> tuple[list[tuple[int, str]], list[str]]:
    reg_keys = sorted(
        {
            (a.proc, a.register)
            for a in cond_atoms(test.condition.body)
            if isinstance(a, RegAtom)
        }
    )
    return reg_keys, sorted(test.locations())


def run(
    test: LitmusTest,
    model: CatModel,
    bound: int = 2,
    ceiling: int = DEFAULT_PATH_CEILING,
    partial: bool = False,
) -> Verdict:
    """Enumerate, filter through `model`, fold states, judge the condition."""
    unrolled = [unroll(p, bound, ceiling, partial) for p in test.processes]
    discarded = sum(u.discarded for u in unrolled)
    truncated = any(u.truncated for u in unrolled)
    reg_keys, locs = _observables(test)

    states: dict[tuple, int] = {}
    enumerated = allowed = 0
    for _, _, ok_c, regvals, locvals in _scan(test, model, unrolled):
        enumerated += 1
        if not ok_c:
            continue
        allowed += 1
        key = (regvals, locvals)
        states[key] = states.get(key, 0) + 1

    body = test.condition.body
    positive = negative = 0
    folded = []
    for (regvals, locvals), count in states.items():
        sat = eval_cond(
            body, dict(zip(reg_keys, regvals)), dict(zip(locs, locvals))
        )
        if sat:
            positive += count
        else:
            negative += count
        folded.append(
            (FinalState(tuple(zip(reg_keys, regvals)), tuple(zip(locs, locvals))), count)
        )
    folded.sort(key=lambda item: item[0].render())

    quantifier = test.condition.quantifier
    if quantifier == "exists":
        ok = positive > 0
    elif quantifier == "~exists":
        ok = positive == 0
    else:  # forall
        ok = negative == 0

    return Verdict(
        test=test.name,
        model=model.name,
        condition=f"{quantifier} {format_cond(body)}",
        states=tuple(folded),
        ok=ok,
        positive=positive,
        negative=negative,
        enumerated=enumerated,
        allowed=allowed,
        forbidden=enumerated - allowed,
        discarded_paths=discarded,
        truncated=truncated,
    )


def witnesses(
    test: LitmusTest,
    model: CatModel,
    bound: int = 2,
    ceiling: int = DEFAULT_PATH_CEILING,
    partial: bool = False,
    limit: int | None = None,
) -> Iterator[CandidateExecution]:
    """Allowed candidates satisfying the condition body, in enumeration
    order, materialized; at most `limit` of them if given."""
    if limit is not None and limit <= 0:
        return
    unrolled = [unroll(p, bound, ceiling, partial) for p in test.processes]
    reg_keys, locs = _observables(test)
    body = test.condition.body
    sat_cache: dict[tuple, bool] = {}
    n = 0
    for ctx, covar, ok_c, regvals, locvals in _scan(test, model, unrolled):
        if not ok_c:
            continue
        key = (regvals, locvals)
        sat = sat_cache.get(key)
        if sat is None:
            sat = eval_cond(
                body, dict(zip(reg_keys, regvals)), dict(zip(locs, locvals))
            )
            sat_cache[key] = sat
        if not sat:
            continue
        yield ctx.realize(covar)
        n += 1
        if limit is not None and n >= limit:
            return


# ---------------------------------------------------------------------------
# The candidate scan, compiled where the model's shape allows


def _scan(test, model, unrolled):
    """Yield (ctx, covar, allowed, regvals, locvals) per candidate.

    regvals and locvals are value tuples over the test's observables,
    None for forbidden candidates.
    """
    reg_keys, locs = _observables(test)
    compiled = _compile(model)
    if compiled is None:
        observables = (reg_keys, locs)
        for ctx, covar in raw_candidates(test, unrolled):
            cand = ctx.realize(covar)
            if cat_check(model, cand).allowed:
                state = final_state(cand, observables)
                regvals = tuple(v for _, v in state.regs)
                locvals = tuple(v for _, v in state.locs)
                yield ctx, covar, True, regvals, locvals
            else:
                yield ctx, covar, False, None, None
        return

    plan = None
    for ctx, covar in raw_candidates(test, unrolled):
        if plan is None or plan.ctx is not ctx:
            plan = _ComboPlan(ctx, compiled, reg_keys)
        if covar.index == 0:
            plan.new_leaf()
        if plan.check(covar):
            locvals = tuple(ctx.write_value(covar.comax[loc]) for loc in locs)
            yield ctx, covar, True, plan.regvals, locvals
        else:
            yield ctx, covar, False, None, None


_DYNAMIC = frozenset(("rf", "co", "fr"))
_RF = Base("rf", REL)
_EXT = Base("ext", REL)
_RFE_TERMS = (Inter(_RF, _EXT, REL), Inter(_EXT, _RF, REL))


@dataclass
class _FastCheck:
    name: str
    static_terms: tuple[RelExpr, ...]
    rf_mode: str | None  # None, "all", or "ext"
    use_co: bool
    use_fr: bool


def _inline(expr: RelExpr, defs: dict[str, RelExpr]) -> RelExpr:
    """Substitute let-bound names so terms expose their base relations.

    Every binary node constructs as (left, right, type) and every unary
    node as (arg, type), so the rebuild is uniform."""
    if isinstance(expr, Base):
        return defs.get(expr.name, expr)
    if hasattr(expr, "left"):
        return type(expr)(_inline(expr.left, defs), _inline(expr.right, defs), expr.type)
    if hasattr(expr, "arg"):
        return type(expr)(_inline(expr.arg, defs), expr.type)
    return expr


def _flatten_union(expr: RelExpr) -> Iterator[RelExpr]:
    if isinstance(expr, Union):
        yield from _flatten_union(expr.left)
        yield from _flatten_union(expr.right)
    else:
        yield expr


def _dynamic_bases(expr: RelExpr) -> bool:
    if isinstance(expr, Base):
        return expr.name in _DYNAMIC
    if hasattr(expr, "left"):
        return _dynamic_bases(expr.left) or _dynamic_bases(expr.right)
    if hasattr(expr, "arg"):
        return _dynamic_bases(expr.arg)
    return False


def _compile(model: CatModel) -> list[_FastCheck] | None:
    """The compiled plan for a model of acyclicity checks over unions of
    rf/co-independent terms and the exact terms rf, rf & ext, co, fr;
    None when the model does not have that shape."""
    defs: dict[str, RelExpr] = {}
    out: list[_FastCheck] = []
    for st in model.statements:
        if isinstance(st, Let):
            defs[st.name] = _inline(st.expr, defs)
            continue
        if st.kind != "acyclic":
            return None
        static_terms: list[RelExpr] = []
        rf_mode: str | None = None
        use_co = use_fr = False
        for term in _flatten_union(_inline(st.expr, defs)):
            if not _dynamic_bases(term):
                static_terms.append(term)
            elif term == _RF:
                rf_mode = "all"
            elif term in _RFE_TERMS:
                rf_mode = rf_mode or "ext"
            elif term == Base("co", REL):
                use_co = True
            elif term == Base("fr", REL):
                use_fr = True
            else:
                return None
        out.append(_FastCheck(st.name, tuple(static_terms), rf_mode, use_co, use_fr))
    return out


def _static_env(ctx: ComboContext) -> dict[str, frozenset]:
    """Bindings valid for every candidate of one path combination:
    everything except rf, co, fr (which the compiled terms never use)."""
    n = ctx.n_events
    kinds: dict[str, set[int]] = {k: set() for k in ("R", "W", "F", "B", "IW")}
    tags: dict[str, set[int]] = {}
    procs = []
    located = []
    for i, (proc, _, kind, loc, ann, _) in enumerate(ctx.static_events):
        kinds[kind].add(i)
        procs.append(proc)
        if loc is not None:
            located.append((i, loc))
        for tag in ann:
            tags.setdefault(tag, set()).add(i)
    env: dict[str, frozenset] = {
        "po": ctx.po_pairs(),
        "loc": frozenset(
            (a, b)
            for a, la in located
            for b, lb in located
            if a != b and la == lb
        ),
        "ext": frozenset(
            (a, b) for a in range(n) for b in range(n) if procs[a] != procs[b]
        ),
        "int": frozenset(
            (a, b)
            for a in range(n)
            for b in range(n)
            if a != b and procs[a] == procs[b]
        ),
        "id": frozenset((i, i) for i in range(n)),
        "R": frozenset(kinds["R"]),
        "W": frozenset(kinds["W"]),
        "F": frozenset(kinds["F"]),
        "B": frozenset(kinds["B"]),
        "IW": frozenset(kinds["IW"]),
        "M": frozenset(kinds["R"] | kinds["W"] | kinds["IW"]),
        "emptyset": frozenset(),
        "_": frozenset(range(n)),
    }
    for tag, members in tags.items():
        env.setdefault(tag, frozenset(members))
    return env


def _transitive_reduction(pairs) -> list[tuple[int, int]]:
    """Fewest edges with the same reachability; `pairs` must be acyclic."""
    succ: dict[int, set[int]] = {}
    for a, b in pairs:
        succ.setdefault(a, set()).add(b)
    reach: dict[int, set[int]] = {}

    def reach_of(x: int) -> set[int]:
        r = reach.get(x)
        if r is None:
            r = set()
            for y in succ.get(x, ()):
                r.add(y)
                r |= reach_of(y)
            reach[x] = r
        return r

    return [
        (a, b)
        for a, b in sorted(pairs)
        if not any(c != b and b in reach_of(c) for c in succ[a])
    ]


def _dfs_cycle(n: int, adj: list[list[int]]) -> bool:
    color = bytearray(n)
    for s in range(n):
        if color[s]:
            continue
        stack = [(s, 0)]
        color[s] = 1
        while stack:
            node, i = stack[-1]
            neigh = adj[node]
            if i < len(neigh):
                stack[-1] = (node, i + 1)
                nxt = neigh[i]
                c = color[nxt]
                if c == 1:
                    return True
                if c == 0:
                    color[nxt] = 1
                    stack.append((nxt, 0))
            else:
                color[node] = 2
                stack.pop()
    return False


class _CheckPlan:
    """One compiled check over one path combination."""

    __slots__ = ("rf_mode", "use_co", "use_fr", "static_cyclic", "adj")

    def __init__(self, ctx: ComboContext, env: dict, fc: _FastCheck):
        self.rf_mode = fc.rf_mode
        self.use_co = fc.use_co
        self.use_fr = fc.use_fr
        static: set = set()
        for term in fc.static_terms:
            static |= eval_rel(env, term)
        self.static_cyclic = has_cycle(static)
        self.adj: list[list[int]] = [[] for _ in range(ctx.n_events)]
        if not self.static_cyclic:
            for a, b in _transitive_reduction(static):
                self.adj[a].append(b)


class _ComboPlan:
    """Compiled checks plus per-leaf state for one path combination."""

    def __init__(self, ctx: ComboContext, compiled: list[_FastCheck],
                 reg_keys: list[tuple[int, str]]):
        self.ctx = ctx
        self.n = ctx.n_events
        self.reg_keys = reg_keys
        self.procs = [se[0] for se in ctx.static_events]
        env = _static_env(ctx) if compiled else None
        self.checks = [_CheckPlan(ctx, env, fc) for fc in compiled]
        self.regvals: tuple[int, ...] = ()
        self.rf_all: list[tuple[int, int]] = []
        self.rf_ext: list[tuple[int, int]] = []
        self.leaf_fail: list[bool] = []

    def new_leaf(self) -> None:
        ctx = self.ctx
        self.regvals = tuple(ctx.reg_value(p, r) for p, r in self.reg_keys)
        src = ctx.src
        procs = self.procs
        self.rf_all = [(src[r], r) for r in ctx.read_ids]
        self.rf_ext = [e for e in self.rf_all if procs[e[0]] != procs[e[1]]]
        self.leaf_fail = []
        for cp in self.checks:
            if cp.static_cyclic or cp.rf_mode is None:
                # static-only cycles fail in check(); nothing to precheck
                self.leaf_fail.append(False)
                continue
            edges = self.rf_all if cp.rf_mode == "all" else self.rf_ext
            self.leaf_fail.append(self._cyclic_with(cp.adj, edges))

    def _cyclic_with(self, adj: list[list[int]], edges) -> bool:
        touched = []
        for a, b in edges:
            lst = adj[a]
            touched.append((a, len(lst)))
            lst.append(b)
        bad = _dfs_cycle(self.n, adj)
        for a, k in reversed(touched):
            del adj[a][k:]
        return bad

    def check(self, covar) -> bool:
        for fail, cp in zip(self.leaf_fail, self.checks):
            if cp.static_cyclic or fail:
                return False
            if not cp.use_co and not cp.use_fr:
                continue  # the leaf precheck was already the whole check
            edges: list[tuple[int, int]] = []
            if cp.use_co:
                edges.extend(covar.pairs)
            if cp.rf_mode == "all":
                edges.extend(self.rf_all)
            elif cp.rf_mode == "ext":
                edges.extend(self.rf_ext)
            if cp.use_fr:
                succ = covar.succ
                for w, r in self.rf_all:
                    for w2 in succ.get(w, ()):
                        edges.append((r, w2))
            if self._cyclic_with(cp.adj, edges):
                return False
        return True


# ---------------------------------------------------------------------------
# Rendering


def render_text(verdict: Verdict) -> str:
    """The fixed plain-text report block for one verdict."""
    lines = [
        f"Test {verdict.test}",
        f"Model {verdict.model}",
        f"States {len(verdict.states)}",
    ]
    lines += [state.render() for state, _ in verdict.states]
    lines.append(verdict.result)
    lines.append("Witnesses")
    lines.append(f"Positive: {verdict.positive} Negative: {verdict.negative}")
    lines.append(f"Condition {verdict.condition}")
    lines.append(
        f"Observation {verdict.test} {verdict.observation} "
        f"{verdict.positive} {verdict.negative}"
    )
    lines.append(
        f"Candidates enumerated={verdict.enumerated} "
        f"allowed={verdict.allowed} forbidden={verdict.forbidden}"
    )
    if verdict.discarded_paths:
        lines.append(
            f"Warning: {verdict.discarded_paths} path prefixes were discarded "
            f"at the unroll bound (verdict is bounded)"
        )
    if verdict.truncated:
        lines.append(
            "Warning: path ceiling reached; enumeration was truncated "
            "(verdict is bounded)"
        )
    return "\n".join(lines) + "\n"


def to_json(verdict: Verdict) -> dict:
    """The same content as `render_text`, as a JSON-ready dict."""
    return {
        "test": verdict.test,
        "model": verdict.model,
        "condition": verdict.condition,
        "result": verdict.result,
        "ok": verdict.ok,
        "observation": verdict.observation,
        "states": [
            {
                "regs": {f"{p}:{r}": v for (p, r), v in state.regs},
                "locs": {loc: v for loc, v in state.locs},
                "count": count,
                "rendered": state.render(),
            }
            for state, count in verdict.states
        ],
        "positive": verdict.positive,
        "negative": verdict.negative,
        "enumerated": verdict.enumerated,
        "allowed": verdict.allowed,
        "forbidden": verdict.forbidden,
        "discarded_paths": verdict.discarded_paths,
        "truncated": verdict.truncated,
        "bounded": verdict.bounded,
    }


def _dot_label(e) -> str:
    kind = e.kind
    if e.annotations:
        kind += "[" + ",".join(e.annotations) + "]"
    label = f"{e.label()} {kind}"
    if e.location is not None:
        label += f" {e.location}={e.value}"
    return label


def write_dot(candidate: CandidateExecution, fh, name: str = "execution") -> None:
    """Write one candidate as a Graphviz digraph: events as nodes, po
    and co transitively reduced for readability, rf and fr in full."""
    fh.write(f'digraph "{name}" {{\n')
    fh.write("  rankdir=TB;\n")
    for e in candidate.events:
        fh.write(f'  e{e.id} [label="{_dot_label(e)}"];\n')
    for rel_name, pairs, reduce in (
        ("po", candidate.po, True),
        ("rf", candidate.rf, False),
        ("co", candidate.co, True),
        ("fr", candidate.fr, False),
    ):
        edges = _transitive_reduction(pairs) if reduce else sorted(pairs)
        for a, b in edges:
            fh.write(f'  e{a} -> e{b} [label="{rel_name}"];\n')
    fh.write("}\n")
