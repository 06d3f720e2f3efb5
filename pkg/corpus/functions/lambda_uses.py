def f(v):
    key = lambda p: -p
    add = lambda a, b=10: a + b
    return sorted(v, key=key), add(1), add(1, 2)
