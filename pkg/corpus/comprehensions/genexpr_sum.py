def f(xs):
    total = sum(x + 1 for x in xs)
    longest = max((x for x in xs if x > 1), default=None)
    return total, longest
