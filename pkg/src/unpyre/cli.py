"""Command line front end: decompile, disasm, verify.

Exit codes are a stable contract: 0 all good, 1 any processing failure,
2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .cfg import analyze_loops, build_basic_blocks, compute_dominators, \
    prune_unreachable, to_dot
from .code_model import VersionTag, flatten_nested_codes
from .disasm import format_listing
from .emitter import EmitStyle
from .errors import UnpyreError
from .pipeline import analyze, decompile_source, function_tree
from .pyc import load_json_dump, load_pyc


def _color_mode():
    return os.environ.get("UNPYRE_COLOR", "auto")


def _diag(msg):
    mode = _color_mode()
    use = mode == "always" or (mode == "auto" and sys.stderr.isatty())
    if use:
        msg = f"\x1b[31m{msg}\x1b[0m"
    print(msg, file=sys.stderr)


def _load_any(path: Path, version_override=None):
    data = path.read_bytes()
    if path.suffix == ".json" or data[:1] in (b"{", b" "):
        return load_json_dump(data.decode("utf-8"), version_override)
    version, root = load_pyc(data)
    return [root]


def _parse_version(text):
    try:
        major, minor = text.split(".")
        return VersionTag(int(major), int(minor))
    except (ValueError, UnpyreError):
        raise SystemExit(2)


def cmd_decompile(args) -> int:
    style = EmitStyle(header=not args.no_header)
    failures = 0
    outputs = []
    for name in args.inputs:
        path = Path(name)
        if not path.exists():
            _diag(f"{name}: no such file")
            return 2
        try:
            override = _parse_version(args.version_override) if args.version_override else None
            roots = _load_any(path, override)
            texts = []
            for root in roots:
                if args.function:
                    flat = dict(flatten_nested_codes(root))
                    if args.function not in flat:
                        raise UnpyreError(
                            f"no code object named {args.function!r}; have: "
                            + ", ".join(sorted(flat))
                        )
                    from .emitter import emit_module

                    target = flat[args.function]
                    texts.append(emit_module([function_tree(target)], style, target))
                else:
                    texts.append(decompile_source(root, style))
            outputs.append((path, "".join(texts)))
        except UnpyreError as exc:
            _diag(f"{name}: {type(exc).__name__}: {exc}")
            failures += 1
    for path, text in outputs:
        if args.out:
            dest = Path(args.out) / (path.stem + ".py")
            dest.parent.mkdir(parents=True, exist_ok=True)
            dest.write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    return 1 if failures else 0


def cmd_disasm(args) -> int:
    path = Path(args.input)
    if not path.exists():
        _diag(f"{args.input}: no such file")
        return 2
    try:
        override = _parse_version(args.version_override) if args.version_override else None
        roots = _load_any(path, override)
        for root in roots:
            for qualname, code in flatten_nested_codes(root):
                if args.cfg and args.dot:
                    instrs, entries, cfg, doms, loops = analyze(code)
                    sys.stdout.write(to_dot(cfg))
                else:
                    from .disasm import decode_instructions

                    print(f"-- {qualname}")
                    sys.stdout.write(format_listing(decode_instructions(code)))
    except UnpyreError as exc:
        _diag(f"{args.input}: {type(exc).__name__}: {exc}")
        return 1
    return 0


def cmd_verify(args) -> int:
    t0 = time.monotonic()
    base = Path(args.corpus_dir)
    if not base.is_dir():
        _diag(f"{args.corpus_dir}: not a directory")
        return 2
    style = EmitStyle(header=True)
    table = {}
    failures = []
    total = 0
    for vdir in sorted(base.glob("py3*")):
        version = vdir.name
        cases = sorted(vdir.glob("*.json"))
        ok = 0
        for case in cases:
            total += 1
            expected = case.with_suffix("").with_suffix(".expected.py")
            name = f"{version}/{case.stem}"
            try:
                roots = _load_any(case)
                text = "".join(decompile_source(r, style) for r in roots)
            except UnpyreError as exc:
                failures.append((name, f"{type(exc).__name__}: {exc}"))
                continue
            if not expected.exists():
                failures.append((name, "missing golden"))
                continue
            golden = expected.read_text(encoding="utf-8")
            if text == golden:
                ok += 1
            else:
                failures.append((name, "output differs from golden"))
        table[version] = (ok, len(cases))
    elapsed = time.monotonic() - t0

    if args.json_report:
        report = {
            "versions": {
                v: {"passed": ok, "total": n} for v, (ok, n) in table.items()
            },
            "failures": [{"case": c, "reason": r} for c, r in failures],
            "elapsed_seconds": round(elapsed, 3),
        }
        json.dump(report, sys.stdout, indent=2)
        print()
    else:
        if not table:
            print("0 cases")
        width = max((len(v) for v in table), default=8)
        for version, (ok, n) in table.items():
            pct = 100.0 * ok / n if n else 100.0
            print(f"{version:<{width}}  {pct:6.1f}%  ({ok}/{n})")
        for case, reason in failures:
            _diag(f"FAIL {case}: {reason}")
        print(f"total {total} cases in {elapsed:.2f}s")
    return 1 if failures else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="unpyre",
                                     description="CPython bytecode decompiler")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decompile", help="decompile .pyc files or JSON dumps")
    d.add_argument("inputs", nargs="+")
    d.add_argument("--out", help="write one .py per input into this directory")
    d.add_argument("--function", help="decompile only this qualified code object")
    d.add_argument("--version-override", help="force MAJ.MIN for JSON dumps")
    d.add_argument("--no-header", action="store_true",
                   help="omit the provenance header comment")
    d.set_defaults(func=cmd_decompile)

    s = sub.add_parser("disasm", help="print an instruction listing")
    s.add_argument("input")
    s.add_argument("--cfg", action="store_true")
    s.add_argument("--dot", action="store_true")
    s.add_argument("--version-override")
    s.set_defaults(func=cmd_disasm)

    v = sub.add_parser("verify", help="check fixture corpus against goldens")
    v.add_argument("corpus_dir")
    v.add_argument("--json-report", action="store_true")
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except BrokenPipeError:
        return 1


if __name__ == "__main__":
    sys.exit(main())
