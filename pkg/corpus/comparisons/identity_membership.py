def f(x, xs):
    return x is None, x is not None, x in xs, x not in xs
