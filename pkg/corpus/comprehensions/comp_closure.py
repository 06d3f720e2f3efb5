def f(k, xs):
    return [x * k for x in xs]
