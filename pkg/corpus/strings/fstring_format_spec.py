def f(x, width):
    return f"[{x:>10.3f}] [{x:{width}.2f}] [{x!r}]"
