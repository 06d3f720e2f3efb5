def f(d):
    return d[1, 2], d[(1, 2)]
