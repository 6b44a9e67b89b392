"""Model language: parsing, typing, evaluation, and the packaged models."""

import pytest

from litmusforge.anarchic import candidate_executions
from litmusforge.cat import (
    REL,
    SET,
    Base,
    Cart,
    CatParseError,
    Check,
    Complement,
    Diff,
    IdSet,
    Inter,
    Inverse,
    Let,
    Plus,
    Seq,
    Star,
    Union,
    candidate_env,
    check,
    eval_rel,
    has_cycle,
    parse_cat,
)


def only_expr(text, tags=()):
    model = parse_cat(f"M\nacyclic {text} as c\n", tags=tags)
    return model.statements[0].expr


def test_parse_model_shape():
    m = parse_cat("My-Model\nlet com = rf | co | fr\nacyclic po | com\n")
    assert m.name == "My-Model"
    assert isinstance(m.statements[0], Let)
    assert m.statements[0].name == "com"
    # unions associate left; the let-bound name stays a reference
    assert m.statements[0].expr == Union(
        Union(Base("rf", REL), Base("co", REL), REL), Base("fr", REL), REL
    )
    assert m.checks() == (
        Check(
            "acyclic",
            Union(Base("po", REL), Base("com", REL), REL),
            "acyclic #1",
        ),
    )


def test_parse_check_kinds_and_names():
    m = parse_cat(
        "M\n"
        "acyclic po as one\n"
        "irreflexive rf\n"
        "empty fr ; co as three\n"
    )
    assert [(c.kind, c.name) for c in m.checks()] == [
        ("acyclic", "one"),
        ("irreflexive", "irreflexive #2"),
        ("empty", "three"),
    ]


def test_parse_nested_comments_and_name_line():
    m = parse_cat(
        "(* leading note *)\n"
        "Name (* trailing ignored... actually part of name? no: *)\n",
    )
    # the name line is the first non-blank line after comment stripping
    assert m.name == "Name"
    m = parse_cat("X\n(* a (* nested *) b *) acyclic po\n// c\n")
    assert len(m.checks()) == 1
    with pytest.raises(CatParseError) as err:
        parse_cat("X\n(* never closed\nacyclic po\n")
    assert "unterminated comment" in str(err.value)


def test_parse_empty_model_has_no_statements():
    assert parse_cat("JustAName\n").statements == ()
    with pytest.raises(CatParseError):
        parse_cat("   \n\n")


@pytest.mark.parametrize(
    "body,message",
    [
        ("acyclic nosuchrel", "unknown name"),
        ("let rec r = po", "not supported"),
        ("let po = rf", "redefinition"),
        ("let x = po\nlet x = rf", "redefinition"),
        ("acyclic W ; R", "composes relations"),
        ("acyclic W | po", "union of a set and a relation"),
        ("acyclic po & R", "intersection of a set and a relation"),
        ("acyclic po \\ W", "difference of a set and a relation"),
        ("acyclic W", "'acyclic' checks a relation"),
        ("irreflexive R", "'irreflexive' checks a relation"),
        ("acyclic [po] ; rf", "lifts a set"),
        ("acyclic po * rf", "product of two sets"),
        ("acyclic W+", "applies to a relation"),
        ("acyclic (po | rf", "expected ')'"),
        ("acyclic po rf", "expected"),
        ("let as = po", "expected a name"),
        ("frobnicate po", "expected 'let'"),
    ],
)
def test_parse_errors(body, message):
    with pytest.raises(CatParseError) as err:
        parse_cat(f"M\n{body}\n")
    assert message in str(err.value)


def test_tags_declare_extra_sets():
    assert only_expr("[mfence] ; po", tags=("mfence",)) == Seq(
        IdSet(Base("mfence", SET)), Base("po", REL)
    )
    with pytest.raises(CatParseError) as err:
        only_expr("[mfence] ; po")
    assert "unknown name" in str(err.value)


def test_precedence():
    po, rf, co = Base("po", REL), Base("rf", REL), Base("co", REL)
    W, R = Base("W", SET), Base("R", SET)
    assert only_expr("po | rf ; co") == Union(po, Seq(rf, co), REL)
    assert only_expr("po | rf & ext") == Union(
        po, Inter(rf, Base("ext", REL), REL), REL
    )
    assert only_expr("rf ; co \\ po") == Seq(rf, Diff(co, po, REL))
    assert only_expr("po \\ W * R") == Diff(po, Cart(W, R), REL)
    assert only_expr("po+") == Plus(po)
    assert only_expr("po*") == Star(po)  # postfix: nothing follows
    assert only_expr("po* ; rf") == Seq(Star(po), rf)
    assert only_expr("po^-1") == Inverse(po)
    assert only_expr("po+^-1") == Inverse(Plus(po))
    assert only_expr("~rf") == Complement(rf, REL)
    assert only_expr("(po | rf)+") == Plus(Union(po, rf, REL))


ENV = {
    "_": frozenset({1, 2, 3}),
    "a": frozenset({(1, 2)}),
    "b": frozenset({(2, 3)}),
    "cyc": frozenset({(1, 2), (2, 1)}),
    "S": frozenset({1, 2}),
    "T": frozenset({2, 3}),
}


@pytest.mark.parametrize(
    "expr,expected",
    [
        (Union(Base("a", REL), Base("b", REL), REL), {(1, 2), (2, 3)}),
        (Inter(Base("S", SET), Base("T", SET), SET), {2}),
        (Diff(Base("S", SET), Base("T", SET), SET), {1}),
        (Seq(Base("a", REL), Base("b", REL)), {(1, 3)}),
        (Cart(Base("S", SET), Base("T", SET)), {(1, 2), (1, 3), (2, 2), (2, 3)}),
        (Inverse(Base("a", REL)), {(2, 1)}),
        (Plus(Union(Base("a", REL), Base("b", REL), REL)),
         {(1, 2), (2, 3), (1, 3)}),
        (Star(Base("a", REL)), {(1, 2), (1, 1), (2, 2), (3, 3)}),
        (Complement(Base("S", SET), SET), {3}),
        (IdSet(Base("S", SET)), {(1, 1), (2, 2)}),
        (Base("absent-tag", SET), set()),
        (Plus(Base("cyc", REL)), {(1, 2), (2, 1), (1, 1), (2, 2)}),
    ],
)
def test_eval_rel(expr, expected):
    assert eval_rel(ENV, expr) == frozenset(expected)


def test_eval_rel_complement_of_relation():
    got = eval_rel(ENV, Complement(Base("a", REL), REL))
    assert (1, 2) not in got
    assert len(got) == 9 - 1


def test_has_cycle():
    assert has_cycle({(1, 2), (2, 1)})
    assert has_cycle({(1, 1)})
    assert not has_cycle({(1, 2), (2, 3), (1, 3)})
    assert not has_cycle(frozenset())
    # long chain plus a back edge
    chain = {(i, i + 1) for i in range(50)}
    assert not has_cycle(chain)
    assert has_cycle(chain | {(50, 0)})


def test_candidate_env_shapes(corpus):
    t = corpus["SB"]
    # the first candidate reads both locations from the initial writes
    cand = next(iter(candidate_executions(t, 2)))
    env = candidate_env(cand)
    iw = sorted(e.id for e in cand.events if e.kind == "IW")
    assert env["IW"] == frozenset(iw)
    assert env["M"] == env["R"] | env["W"] | env["IW"]
    assert env["_"] == frozenset(e.id for e in cand.events)
    assert env["id"] == frozenset((i, i) for i in env["_"])
    # initial writes run on no process: external to every path event
    path_events = env["_"] - env["IW"]
    for i in iw:
        assert all((i, j) in env["ext"] for j in path_events)
        assert all((i, j) not in env["int"] for j in path_events)
    # loc relates same-location accesses both ways, never reflexively
    for a, b in env["loc"]:
        assert a != b
        assert (b, a) in env["loc"]
        assert cand.events[a].location == cand.events[b].location
    assert env["rf"] == cand.rf and env["co"] == cand.co
    assert env["fr"] == cand.fr and env["po"] == cand.po
    assert env["B"] == frozenset(
        e.id for e in cand.events if e.kind == "B"
    )


def test_candidate_env_includes_tag_sets(corpus):
    cand = next(iter(candidate_executions(corpus["SB+fences"], 2)))
    env = candidate_env(cand)
    fences = frozenset(e.id for e in cand.events if e.kind == "F")
    assert env["mfence"] == fences and fences


def test_check_reports_every_failure(corpus):
    cand = next(iter(candidate_executions(corpus["SB"], 2)))
    model = parse_cat(
        "M\n"
        "empty po as p1\n"
        "acyclic rf as fine\n"
        "empty co as p2\n"
    )
    verdict = check(model, cand)
    assert not verdict.allowed
    assert verdict.failed_checks == ("p1", "p2")
    ok = check(parse_cat("M\nacyclic po\n"), cand)
    assert ok.allowed and ok.failed_checks == ()


def test_lets_extend_the_environment(corpus):
    cand = next(iter(candidate_executions(corpus["SB"], 2)))
    model = parse_cat("M\nlet com = rf | co | fr\nempty com & id as refl\n")
    assert check(model, cand).allowed


def test_packaged_models(models):
    assert models["anarchic"].name == "Anarchic"
    assert models["anarchic"].statements == ()
    assert models["sc"].name == "SC"
    assert [c.name for c in models["sc"].checks()] == ["sc"]
    assert models["coherence"].name == "Coherence"
    assert [c.name for c in models["coherence"].checks()] == ["coherence"]
    assert models["tso"].name == "TSO"
    lets = [s.name for s in models["tso"].statements if isinstance(s, Let)]
    assert lets == ["po-loc", "rfe", "ppo", "fenced"]
    assert [c.name for c in models["tso"].checks()] == [
        "sc-per-location",
        "tso",
    ]
