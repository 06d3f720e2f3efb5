"""Corpus enumeration: corpus/<category>/<case>.py plus cases.toml.

cases.toml declares, per case, the call expressions the round-trip oracle
evaluates, and optionally the versions a case is restricted to:

    [syntax.chained_compare]
    calls = ["f(1, 2, 3)", "f(3, 2, 1)"]
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


@dataclass
class Case:
    category: str
    name: str
    path: Path
    calls: list = field(default_factory=list)
    setup: str = ""
    versions: list = field(default_factory=list)  # empty = all

    @property
    def case_id(self):
        return f"{self.category}.{self.name}"


def load_corpus(corpus_dir) -> list[Case]:
    corpus_dir = Path(corpus_dir)
    meta_path = corpus_dir / "cases.toml"
    meta = {}
    if meta_path.exists():
        meta = tomllib.loads(meta_path.read_text())
    cases = []
    for cat_dir in sorted(p for p in corpus_dir.iterdir() if p.is_dir()):
        for py in sorted(cat_dir.glob("*.py")):
            entry = meta.get(cat_dir.name, {}).get(py.stem, {})
            cases.append(
                Case(
                    category=cat_dir.name,
                    name=py.stem,
                    path=py,
                    calls=list(entry.get("calls", [])),
                    setup=entry.get("setup", ""),
                    versions=[tuple(v) for v in entry.get("versions", [])],
                )
            )
    return cases


def case_applies(case: Case, version) -> bool:
    return not case.versions or tuple(version) in case.versions
