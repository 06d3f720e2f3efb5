def f(v):
    first, (x, y), last = v
    return first, x, y, last
