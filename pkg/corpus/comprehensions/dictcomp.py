def f(words):
    return {w: len(w) for w in words if w}
