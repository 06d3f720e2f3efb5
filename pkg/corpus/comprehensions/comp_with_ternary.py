def f(xs):
    return [x if x % 2 else -x for x in xs]
