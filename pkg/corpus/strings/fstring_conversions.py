def f(s):
    return f"{s!r} {s!s} {s!a} literal={{braces}}"
