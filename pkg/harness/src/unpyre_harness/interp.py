"""Discovery of the CPython interpreters the harness drives.

Search order per version X.Y: $UNPYRE_PY_XY, then pythonX.Y on PATH, then
a few conventional install prefixes.  Fixture generation needs the real
interpreter of each version; everything downstream consumes the dumped
fixtures and runs anywhere.
"""

from __future__ import annotations

import os
import shutil
import subprocess
from functools import lru_cache

VERSIONS = ((3, 8), (3, 9), (3, 10), (3, 11))

_EXTRA_PREFIXES = (
    "/root/tools/cpython/bin",
    "/opt/cpython/bin",
    "/usr/local/bin",
)


@lru_cache(maxsize=None)
def find_interpreter(version) -> str | None:
    major, minor = version
    env = os.environ.get(f"UNPYRE_PY_{major}{minor}")
    if env and os.path.exists(env):
        return env
    name = f"python{major}.{minor}"
    path = shutil.which(name)
    if path:
        return path
    for prefix in _EXTRA_PREFIXES:
        cand = os.path.join(prefix, name)
        if os.path.exists(cand):
            return cand
    return None


def available_interpreters() -> dict:
    """version pair -> executable, for every version that answers."""
    found = {}
    for version in VERSIONS:
        exe = find_interpreter(version)
        if exe is None:
            continue
        try:
            out = subprocess.run(
                [exe, "-c", "import sys; print('%d.%d' % sys.version_info[:2])"],
                capture_output=True, text=True, timeout=20,
            )
        except (OSError, subprocess.TimeoutExpired):
            continue
        if out.returncode == 0 and out.stdout.strip() == f"{version[0]}.{version[1]}":
            found[version] = exe
    return found


def run_target_script(exe, script, args, stdin_text=None, timeout=60):
    """Run one of the target-side scripts under a specific interpreter.

    PYTHONHASHSEED is pinned so dumped constants (frozenset ordering) are
    reproducible.
    """
    env = dict(os.environ)
    env["PYTHONHASHSEED"] = "0"
    env.pop("PYTHONPATH", None)
    return subprocess.run(
        [exe, script, *args],
        input=stdin_text,
        capture_output=True,
        text=True,
        timeout=timeout,
        env=env,
    )
