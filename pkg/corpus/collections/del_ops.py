def f(d, k):
    x = 1
    y = 2
    del x
    del d[k], y
    return d
