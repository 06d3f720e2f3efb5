"""Fixture generation: compile, dump, decompile via the CLI, verify, commit.

Oracle independence: this module never imports the decompiler.  Decompiled
candidates come from the `unpyre` command line; semantic verification runs
originals and candidates through the target interpreter in a subprocess.
"""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

from .corpus import case_applies, load_corpus
from .interp import available_interpreters, run_target_script

TARGET_DIR = Path(__file__).parent / "target"
CASE_TIMEOUT = 5.0


class GenError(Exception):
    pass


def unpyre_cmd():
    return ["unpyre"]


def fixture_dir(fixtures_root, version) -> Path:
    return Path(fixtures_root) / f"py3{version[1]}"


def dump_case(exe, case, out_base):
    proc = run_target_script(
        exe,
        str(TARGET_DIR / "dump_code.py"),
        [str(case.path), str(out_base), f"{case.name}.py"],
    )
    if proc.returncode != 0:
        raise GenError(f"{case.case_id}: compile failed: {proc.stderr.strip()}")


def decompile_via_cli(json_path) -> str:
    proc = subprocess.run(
        [*unpyre_cmd(), "decompile", str(json_path)],
        capture_output=True,
        text=True,
        timeout=120,
    )
    if proc.returncode != 0:
        raise GenError(f"decompile failed: {proc.stderr.strip()}")
    return proc.stdout


def run_calls(exe, module_path, calls, setup=""):
    req = json.dumps({"module": str(module_path), "setup": setup, "calls": calls})
    try:
        proc = run_target_script(
            exe, str(TARGET_DIR / "run_case.py"), [], stdin_text=req,
            timeout=CASE_TIMEOUT,
        )
    except subprocess.TimeoutExpired:
        raise GenError(f"{module_path}: timed out after {CASE_TIMEOUT}s")
    if proc.returncode != 0:
        raise GenError(f"{module_path}: runner crashed: {proc.stderr.strip()}")
    return json.loads(proc.stdout)["results"]


def behaviors_equal(a, b):
    return a == b


def generate_fixtures(corpus_dir, fixtures_root, only_versions=None,
                      report=print) -> int:
    """Full fixture build; returns the number of failures."""
    interps = available_interpreters()
    if only_versions:
        interps = {v: e for v, e in interps.items() if v in only_versions}
    if not interps:
        report("no target interpreters found")
        return 1
    cases = load_corpus(corpus_dir)
    failures = 0
    for version, exe in sorted(interps.items()):
        vdir = fixture_dir(fixtures_root, version)
        vdir.mkdir(parents=True, exist_ok=True)
        done = 0
        for case in cases:
            if not case_applies(case, version):
                continue
            base = vdir / case.case_id
            try:
                dump_case(exe, case, base)
                text = decompile_via_cli(Path(str(base) + ".json"))
                candidate = Path(str(base) + ".candidate.py")
                candidate.write_text(text, encoding="utf-8")
                if case.calls:
                    orig = run_calls(exe, Path(str(base) + ".pyc"), case.calls,
                                     case.setup)
                    redo = run_calls(exe, candidate, case.calls, case.setup)
                    if not behaviors_equal(orig, redo):
                        raise GenError(
                            f"{case.case_id}: behavior diverges\n"
                            f"  original:   {orig}\n  decompiled: {redo}"
                        )
                candidate.rename(Path(str(base) + ".expected.py"))
                done += 1
            except GenError as exc:
                failures += 1
                report(f"FAIL py3{version[1]} {exc}")
        report(f"py3{version[1]}: {done} fixtures")
    return failures
