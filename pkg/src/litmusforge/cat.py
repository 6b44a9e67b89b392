"""A cat-style consistency model: parse, evaluate, allow or forbid.

A model file names itself on its first non-comment line, then gives a
sequence of statements:

    let name = expr
    acyclic expr [as name]
    irreflexive expr [as name]
    empty expr [as name]

Expressions combine predefined relations and sets with, loosest first:

    e | e    union                e ~e      complement (same type)
    e ; e    relational composition         e+        transitive closure
    e \\ e    difference           e^-1      inverse
    e & e    intersection         e*        reflexive-transitive closure
    S * S    cartesian product (sets only)
    [S]      the identity relation on set S
    ( e )    grouping

Comments are `//` to end of line and nestable `(* ... *)`.  Names are
resolved in order: forward references, redefinition (including of a
predefined name), and `let rec` are all rejected at parse time.

Predefined over one candidate execution: relations `po`, `rf`, `co`,
`fr` (= rf^-1 ; co), `loc` (distinct same-location events), `ext`
(different processes; initial writes count as external to everyone),
`int` (same process, distinct events), `id`; sets `R`, `W`, `F`, `B`,
`IW`, `M` (= R | W | IW), `emptyset`, `_` (every event), and one set
per annotation tag when the parser is told the test's tags.

A candidate is allowed iff every check passes; failing check names are
all reported, without short-circuiting.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .anarchic import CandidateExecution

REL = "relation"
SET = "set"

_KEYWORDS = frozenset(("let", "rec", "as", "acyclic", "irreflexive", "empty"))

PREDEFINED: dict[str, str] = {
    "po": REL,
    "rf": REL,
    "co": REL,
    "fr": REL,
    "loc": REL,
    "ext": REL,
    "int": REL,
    "id": REL,
    "R": SET,
    "W": SET,
    "F": SET,
    "B": SET,
    "IW": SET,
    "M": SET,
    "emptyset": SET,
    "_": SET,
}


class CatError(Exception):
    pass


class CatParseError(CatError):
    def __init__(self, message: str, filename: str = "<cat>",
                 line: int = 0, col: int = 0):
        super().__init__(f"{filename}:{line}:{col}: {message}")
        self.message = message
        self.filename = filename
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Expression AST; every node knows whether it denotes a set or a relation


@dataclass(frozen=True)
class RelExpr:
    pass


@dataclass(frozen=True)
class Base(RelExpr):
    name: str
    type: str


@dataclass(frozen=True)
class Union(RelExpr):
    left: RelExpr
    right: RelExpr
    type: str


@dataclass(frozen=True)
class Inter(RelExpr):
    left: RelExpr
    right: RelExpr
    type: str


@dataclass(frozen=True)
class Diff(RelExpr):
    left: RelExpr
    right: RelExpr
    type: str


@dataclass(frozen=True)
class Seq(RelExpr):
    left: RelExpr
    right: RelExpr
    type: str = REL


@dataclass(frozen=True)
class Cart(RelExpr):
    left: RelExpr
    right: RelExpr
    type: str = REL


@dataclass(frozen=True)
class Inverse(RelExpr):
    arg: RelExpr
    type: str = REL


@dataclass(frozen=True)
class Plus(RelExpr):
    arg: RelExpr
    type: str = REL


@dataclass(frozen=True)
class Star(RelExpr):
    arg: RelExpr
    type: str = REL


@dataclass(frozen=True)
class Complement(RelExpr):
    arg: RelExpr
    type: str


@dataclass(frozen=True)
class IdSet(RelExpr):
    arg: RelExpr  # a set expression
    type: str = REL


@dataclass(frozen=True)
class Let:
    name: str
    expr: RelExpr


@dataclass(frozen=True)
class Check:
    kind: str  # "acyclic" | "irreflexive" | "empty"
    expr: RelExpr
    name: str


@dataclass(frozen=True)
class CatModel:
    name: str
    statements: tuple[Let | Check, ...]

    def checks(self) -> tuple[Check, ...]:
        return tuple(s for s in self.statements if isinstance(s, Check))


@dataclass(frozen=True)
class ModelVerdict:
    allowed: bool
    failed_checks: tuple[str, ...]


# ---------------------------------------------------------------------------
# Lexing

_TOKEN_RE = re.compile(
    r"[A-Za-z_][A-Za-z0-9_\-]*|\^-1|[|&\\;+*~()\[\]=]"
)


@dataclass(frozen=True)
class _Token:
    text: str
    line: int
    col: int


def _strip_cat_comments(text: str, filename: str) -> str:
    """Blank out // line comments and nestable (* *) comments,
    preserving every character position."""
    out = list(text)
    i = 0
    n = len(text)
    depth = 0
    start_line = 1
    line = 1
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
            continue
        if depth == 0 and c == "/" and text[i : i + 2] == "//":
            while i < n and text[i] != "\n":
                out[i] = " "
                i += 1
            continue
        if text[i : i + 2] == "(*":
            if depth == 0:
                start_line = line
            depth += 1
            out[i] = out[i + 1] = " "
            i += 2
            continue
        if depth > 0 and text[i : i + 2] == "*)":
            depth -= 1
            out[i] = out[i + 1] = " "
            i += 2
            continue
        if depth > 0:
            out[i] = " "
        i += 1
    if depth > 0:
        raise CatParseError("unterminated comment", filename, start_line, 1)
    return "".join(out)


def _tokenize(text: str, filename: str, from_line: int) -> list[_Token]:
    tokens = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if lineno < from_line:
            continue
        pos = 0
        while pos < len(line):
            if line[pos].isspace():
                pos += 1
                continue
            m = _TOKEN_RE.match(line, pos)
            if not m:
                raise CatParseError(
                    f"unexpected character {line[pos]!r}",
                    filename, lineno, pos + 1,
                )
            tokens.append(_Token(m.group(), lineno, m.start() + 1))
            pos = m.end()
    return tokens


# ---------------------------------------------------------------------------
# Parsing

_EXPR_START = frozenset(("(", "[", "~"))


class _Parser:
    def __init__(self, tokens: list[_Token], filename: str,
                 names: dict[str, str]):
        self.tokens = tokens
        self.pos = 0
        self.filename = filename
        self.names = names

    def error(self, message: str, tok: _Token | None = None):
        tok = tok or self.peek()
        if tok is None:
            raise CatParseError(message + " at end of input", self.filename)
        raise CatParseError(message, self.filename, tok.line, tok.col)

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            raise CatParseError("unexpected end of input", self.filename)
        self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.text == text

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok is None or tok.text != text:
            self.error(f"expected {text!r}")
        return self.next()

    def _is_ident(self, tok: _Token) -> bool:
        return bool(re.fullmatch(r"[A-Za-z_][A-Za-z0-9_\-]*", tok.text))

    # precedence, loosest first: | ; \ & cartesian-* ~ postfix
    def expr(self) -> RelExpr:
        left = self.seq()
        while self.at("|"):
            tok = self.next()
            right = self.seq()
            if _type(left) != _type(right):
                self.error("union of a set and a relation", tok)
            left = Union(left, right, _type(left))
        return left

    def seq(self) -> RelExpr:
        left = self.diff()
        while self.at(";"):
            tok = self.next()
            right = self.diff()
            if _type(left) != REL or _type(right) != REL:
                self.error("';' composes relations", tok)
            left = Seq(left, right)
        return left

    def diff(self) -> RelExpr:
        left = self.inter()
        while self.at("\\"):
            tok = self.next()
            right = self.inter()
            if _type(left) != _type(right):
                self.error("difference of a set and a relation", tok)
            left = Diff(left, right, _type(left))
        return left

    def inter(self) -> RelExpr:
        left = self.cart()
        while self.at("&"):
            tok = self.next()
            right = self.cart()
            if _type(left) != _type(right):
                self.error("intersection of a set and a relation", tok)
            left = Inter(left, right, _type(left))
        return left

    def cart(self) -> RelExpr:
        left = self.prefix()
        if self.at("*") and self._starts_expr(self.pos + 1):
            tok = self.next()
            right = self.prefix()
            if _type(left) != SET or _type(right) != SET:
                self.error("'*' builds the product of two sets", tok)
            return Cart(left, right)
        return left

    def _starts_expr(self, pos: int) -> bool:
        if pos >= len(self.tokens):
            return False
        tok = self.tokens[pos]
        if tok.text in _EXPR_START:
            return True
        return self._is_ident(tok) and tok.text not in _KEYWORDS

    def prefix(self) -> RelExpr:
        if self.at("~"):
            tok = self.next()
            arg = self.prefix()
            return Complement(arg, _type(arg))
        return self.postfix()

    def postfix(self) -> RelExpr:
        node = self.atom()
        while True:
            if self.at("+") or self.at("^-1") or (
                self.at("*") and not self._starts_expr(self.pos + 1)
            ):
                tok = self.next()
                if _type(node) != REL:
                    self.error(f"{tok.text!r} applies to a relation", tok)
                if tok.text == "+":
                    node = Plus(node)
                elif tok.text == "*":
                    node = Star(node)
                else:
                    node = Inverse(node)
            else:
                return node

    def atom(self) -> RelExpr:
        tok = self.peek()
        if tok is None:
            self.error("expected an expression")
        if tok.text == "(":
            self.next()
            node = self.expr()
            self.expect(")")
            return node
        if tok.text == "[":
            self.next()
            node = self.expr()
            self.expect("]")
            if _type(node) != SET:
                self.error("'[...]' lifts a set to a relation", tok)
            return IdSet(node)
        if self._is_ident(tok) and tok.text not in _KEYWORDS:
            self.next()
            if tok.text not in self.names:
                self.error(f"unknown name {tok.text!r}", tok)
            return Base(tok.text, self.names[tok.text])
        self.error(f"expected an expression, found {tok.text!r}")


def _type(node: RelExpr) -> str:
    return node.type


def parse_cat(text: str, filename: str = "<cat>",
              tags: tuple[str, ...] = ()) -> CatModel:
    """Parse a model.  `tags` declares annotation-tag sets the model may
    reference (the tags of the litmus tests it will be checked against);
    any other unknown name is an error."""
    stripped = _strip_cat_comments(text, filename)
    name = None
    name_line = 0
    for lineno, line in enumerate(stripped.splitlines(), start=1):
        if line.strip():
            name = line.strip()
            name_line = lineno
            break
    if name is None:
        raise CatParseError("empty model: missing name line", filename)

    names = dict(PREDEFINED)
    for tag in tags:
        if tag not in names:
            names[tag] = SET
    tokens = _tokenize(stripped, filename, name_line + 1)
    p = _Parser(tokens, filename, names)
    statements: list[Let | Check] = []
    n_checks = 0
    while p.peek() is not None:
        tok = p.next()
        if tok.text == "let":
            if p.at("rec"):
                p.error("'let rec' is not supported", p.peek())
            ident = p.next()
            if not p._is_ident(ident) or ident.text in _KEYWORDS:
                p.error("expected a name after 'let'", ident)
            if ident.text in names:
                p.error(f"redefinition of {ident.text!r}", ident)
            p.expect("=")
            expr = p.expr()
            names[ident.text] = _type(expr)
            statements.append(Let(ident.text, expr))
        elif tok.text in ("acyclic", "irreflexive", "empty"):
            expr = p.expr()
            if _type(expr) != REL:
                p.error(f"'{tok.text}' checks a relation", tok)
            n_checks += 1
            check_name = f"{tok.text} #{n_checks}"
            if p.at("as"):
                p.next()
                ident = p.next()
                if not p._is_ident(ident):
                    p.error("expected a name after 'as'", ident)
                check_name = ident.text
            statements.append(Check(tok.text, expr, check_name))
        else:
            p.error(
                f"expected 'let', 'acyclic', 'irreflexive' or 'empty', "
                f"found {tok.text!r}",
                tok,
            )
    return CatModel(name, tuple(statements))


def load_cat(path: str | Path, tags: tuple[str, ...] = ()) -> CatModel:
    path = Path(path)
    return parse_cat(path.read_text(encoding="utf-8"), str(path), tags)


# ---------------------------------------------------------------------------
# Evaluation


def candidate_env(candidate: CandidateExecution) -> dict[str, frozenset]:
    """The predefined bindings for one candidate execution.

    Annotation-tag sets are included for tags present on the
    candidate's events; a tag with no events here simply evaluates as
    the empty set."""
    events = candidate.events
    ids = frozenset(e.id for e in events)
    kinds: dict[str, set[int]] = {"R": set(), "W": set(), "F": set(), "B": set(), "IW": set()}
    tags: dict[str, set[int]] = {}
    for e in events:
        kinds[e.kind].add(e.id)
        for tag in e.annotations:
            tags.setdefault(tag, set()).add(e.id)
    located = [(e.id, e.location, e.proc) for e in events if e.location is not None]
    loc = frozenset(
        (a, b)
        for a, la, _ in located
        for b, lb, _ in located
        if a != b and la == lb
    )
    ext = frozenset(
        (a.id, b.id) for a in events for b in events if a.proc != b.proc
    )
    intra = frozenset(
        (a.id, b.id)
        for a in events
        for b in events
        if a.proc == b.proc and a.id != b.id
    )
    env: dict[str, frozenset] = {
        "po": candidate.po,
        "rf": candidate.rf,
        "co": candidate.co,
        "fr": candidate.fr,
        "loc": loc,
        "ext": ext,
        "int": intra,
        "id": frozenset((i, i) for i in ids),
        "R": frozenset(kinds["R"]),
        "W": frozenset(kinds["W"]),
        "F": frozenset(kinds["F"]),
        "B": frozenset(kinds["B"]),
        "IW": frozenset(kinds["IW"]),
        "M": frozenset(kinds["R"] | kinds["W"] | kinds["IW"]),
        "emptyset": frozenset(),
        "_": ids,
    }
    for tag, members in tags.items():
        env.setdefault(tag, frozenset(members))
    return env


def _compose(r: frozenset, s: frozenset) -> frozenset:
    succ: dict = {}
    for a, b in s:
        succ.setdefault(a, []).append(b)
    return frozenset((a, c) for a, b in r for c in succ.get(b, ()))


def _closure(r: frozenset) -> frozenset:
    succ: dict = {}
    for a, b in r:
        succ.setdefault(a, set()).add(b)
    out = set()
    for start in succ:
        seen: set = set()
        stack = list(succ[start])
        while stack:
            x = stack.pop()
            if x in seen:
                continue
            seen.add(x)
            stack.extend(succ.get(x, ()))
        out.update((start, x) for x in seen)
    return frozenset(out)


def eval_rel(env: dict[str, frozenset], expr: RelExpr) -> frozenset:
    """Evaluate an expression to a frozenset of id pairs (relations) or
    ids (sets) under `env`; `env["_"]` is the event universe."""
    if isinstance(expr, Base):
        return env.get(expr.name, frozenset())
    if isinstance(expr, Union):
        return eval_rel(env, expr.left) | eval_rel(env, expr.right)
    if isinstance(expr, Inter):
        return eval_rel(env, expr.left) & eval_rel(env, expr.right)
    if isinstance(expr, Diff):
        return eval_rel(env, expr.left) - eval_rel(env, expr.right)
    if isinstance(expr, Seq):
        return _compose(eval_rel(env, expr.left), eval_rel(env, expr.right))
    if isinstance(expr, Cart):
        left = eval_rel(env, expr.left)
        right = eval_rel(env, expr.right)
        return frozenset((a, b) for a in left for b in right)
    if isinstance(expr, Inverse):
        return frozenset((b, a) for a, b in eval_rel(env, expr.arg))
    if isinstance(expr, Plus):
        return _closure(eval_rel(env, expr.arg))
    if isinstance(expr, Star):
        return _closure(eval_rel(env, expr.arg)) | frozenset(
            (e, e) for e in env["_"]
        )
    if isinstance(expr, Complement):
        if expr.type == SET:
            return env["_"] - eval_rel(env, expr.arg)
        universe = env["_"]
        return frozenset(
            (a, b) for a in universe for b in universe
        ) - eval_rel(env, expr.arg)
    if isinstance(expr, IdSet):
        return frozenset((e, e) for e in eval_rel(env, expr.arg))
    raise CatError(f"not a cat expression: {expr!r}")


def has_cycle(pairs) -> bool:
    """Direct depth-first cycle detection; never materializes a
    transitive closure."""
    succ: dict = {}
    for a, b in pairs:
        succ.setdefault(a, []).append(b)
    color: dict = {}
    for start in succ:
        if color.get(start):
            continue
        stack = [(start, iter(succ[start]))]
        color[start] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                c = color.get(nxt)
                if c == 1:
                    return True
                if c is None:
                    color[nxt] = 1
                    stack.append((nxt, iter(succ.get(nxt, ()))))
                    advanced = True
                    break
            if not advanced:
                color[node] = 2
                stack.pop()
    return False


def check(model: CatModel, candidate: CandidateExecution) -> ModelVerdict:
    """Run every check of `model` on one candidate: allowed iff all
    pass.  Evaluation does not short-circuit; every failing check is
    named in the verdict."""
    env = candidate_env(candidate)
    failed = []
    for st in model.statements:
        if isinstance(st, Let):
            env[st.name] = eval_rel(env, st.expr)
            continue
        r = eval_rel(env, st.expr)
        if st.kind == "acyclic":
            ok = not has_cycle(r)
        elif st.kind == "irreflexive":
            ok = all(a != b for a, b in r)
        else:
            ok = not r
        if not ok:
            failed.append(st.name)
    return ModelVerdict(not failed, tuple(failed))
