def f(v):
    a, *mid, z = v
    first, *rest = v
    return a, mid, z, first, rest
