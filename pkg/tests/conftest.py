"""Shared fixtures: the shipped litmus corpus and the packaged models."""

from pathlib import Path

import pytest

from litmusforge.cat import load_cat
from litmusforge.litmus import load_litmus

REPO = Path(__file__).resolve().parent.parent
LITMUS_DIR = REPO / "litmus"
MODEL_DIR = REPO / "src" / "litmusforge" / "models"

SMALL_TESTS = ("SB", "MP", "LB", "2+2W", "R", "CoRR", "CoWW")
ACCEPTANCE_CORPUS = SMALL_TESTS + ("peterson",)


def litmus_path(name: str) -> Path:
    return LITMUS_DIR / f"{name}.litmus"


def state_keys(verdict):
    """A verdict's final states in the oracles' key shape:
    (("0:r1", v), ..., (loc, v), ...) tuples."""
    return {
        tuple((f"{p}:{r}", v) for (p, r), v in state.regs) + state.locs
        for state, _ in verdict.states
    }


def candidate_keys(candidates):
    """Candidates in the brute oracle's key shape: (chosen paths, rf, co)
    with events named ("init", loc) or (proc, po)."""
    out = set()
    for cand in candidates:
        key = {
            e.id: ("init", e.location) if e.kind == "IW" else (e.proc, e.po)
            for e in cand.events
        }
        out.add(
            (
                cand.chosen_paths,
                frozenset((key[w], key[r]) for w, r in cand.rf),
                frozenset((key[a], key[b]) for a, b in cand.co),
            )
        )
    return out


@pytest.fixture(scope="session")
def corpus():
    return {
        p.stem: load_litmus(p) for p in sorted(LITMUS_DIR.glob("*.litmus"))
    }


@pytest.fixture(scope="session")
def models(corpus):
    tags = tuple(
        sorted(frozenset().union(*(t.annotations for t in corpus.values())))
    )
    return {
        p.stem: load_cat(p, tags=tags)
        for p in sorted(MODEL_DIR.glob("*.cat"))
    }
