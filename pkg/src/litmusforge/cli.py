"""Command-line driver: litmus test files in, one verdict block each.

    litmusforge -model sc.cat SB.litmus MP.litmus

The model is a literal file path, or a name looked up first in
$LITMUSFORGE_MODELDIR and then among the packaged models (`anarchic`,
`sc`, `coherence`, `tso`; a missing `.cat` suffix is supplied).  Exit
status: 0 when every verdict was computed, 1 on usage or parse errors,
2 when a test exceeds the path budget and `-partial` was not given.

Output is plain text by default, a JSON array with `-json`, and both
can be combined with `-dot DIR` to write one Graphviz file per witness
execution (a candidate the model allows that satisfies the condition
body).  Repeated runs on identical inputs print identical bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .cat import CatParseError, load_cat
from .litmus import LitmusError, load_litmus
from .paths import DEFAULT_PATH_CEILING, UnrollBudgetError
from .verdict import render_text, run, to_json, witnesses, write_dot

_DOT_WITNESS_CAP = 16


class _ArgumentParser(argparse.ArgumentParser):
    # contract: every usage error exits 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="litmusforge",
        description="Run litmus tests against an axiomatic consistency model.",
        allow_abbrev=False,
    )
    parser.add_argument(
        "-model",
        required=True,
        metavar="FILE",
        help="cat model: a file path, or a name resolved in "
        "$LITMUSFORGE_MODELDIR and then the packaged models",
    )
    parser.add_argument(
        "-unroll",
        type=int,
        default=2,
        metavar="N",
        help="take each backward branch at most N times per path (default 2)",
    )
    parser.add_argument(
        "-ceiling",
        type=int,
        default=DEFAULT_PATH_CEILING,
        metavar="N",
        help=f"maximum unrolled paths per process (default {DEFAULT_PATH_CEILING})",
    )
    parser.add_argument(
        "-json",
        action="store_true",
        help="print one JSON array of verdict objects instead of text blocks",
    )
    parser.add_argument(
        "-dot",
        metavar="DIR",
        help="write a Graphviz file per witness execution into DIR "
        f"(at most {_DOT_WITNESS_CAP} per test)",
    )
    parser.add_argument(
        "-partial",
        action="store_true",
        help="report a truncated, bounded verdict when the path ceiling "
        "is hit instead of failing with exit status 2",
    )
    parser.add_argument(
        "tests", nargs="+", metavar="LITMUS", help="litmus test files"
    )
    return parser


def resolve_model(spec: str) -> Path | None:
    """A literal path, then $LITMUSFORGE_MODELDIR, then the packaged
    models; names may omit the .cat suffix."""
    p = Path(spec)
    if p.is_file():
        return p
    names = [spec] if spec.endswith(".cat") else [spec, spec + ".cat"]
    search = []
    moddir = os.environ.get("LITMUSFORGE_MODELDIR")
    if moddir:
        search.append(Path(moddir))
    search.append(Path(__file__).parent / "models")
    for d in search:
        for name in names:
            q = d / name
            if q.is_file():
                return q
    return None


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.unroll < 1:
        print("litmusforge: error: -unroll must be at least 1", file=sys.stderr)
        return 1
    if args.ceiling < 1:
        print("litmusforge: error: -ceiling must be at least 1", file=sys.stderr)
        return 1

    tests = []
    for path in args.tests:
        try:
            tests.append(load_litmus(path))
        except LitmusError as e:
            print(f"litmusforge: {e}", file=sys.stderr)
            return 1
        except OSError as e:
            print(f"litmusforge: {path}: {e.strerror or e}", file=sys.stderr)
            return 1

    model_path = resolve_model(args.model)
    if model_path is None:
        print(f"litmusforge: model not found: {args.model}", file=sys.stderr)
        return 1
    tags = tuple(sorted(frozenset().union(*(t.annotations for t in tests))))
    try:
        model = load_cat(model_path, tags=tags)
    except CatParseError as e:
        print(f"litmusforge: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"litmusforge: {model_path}: {e.strerror or e}", file=sys.stderr)
        return 1

    json_docs = []
    for i, test in enumerate(tests):
        try:
            verdict = run(
                test, model, args.unroll, args.ceiling, args.partial
            )
        except UnrollBudgetError as e:
            print(f"litmusforge: {test.name}: {e}", file=sys.stderr)
            return 2
        if args.json:
            json_docs.append(to_json(verdict))
        else:
            if i:
                sys.stdout.write("\n")
            sys.stdout.write(render_text(verdict))
        if args.dot:
            _write_witnesses(test, model, args)
    if args.json:
        print(json.dumps(json_docs, indent=2))
    return 0


def _write_witnesses(test, model, args) -> None:
    outdir = Path(args.dot)
    outdir.mkdir(parents=True, exist_ok=True)
    stream = witnesses(
        test, model, args.unroll, args.ceiling, args.partial,
        limit=_DOT_WITNESS_CAP,
    )
    for k, candidate in enumerate(stream, start=1):
        target = outdir / f"{test.name}-w{k}.dot"
        with open(target, "w", encoding="utf-8") as fh:
            write_dot(candidate, fh, name=f"{test.name} witness {k}")
