def f(a, b):
    return pow(max(a, b), min(a, b), 7), sum([a, b], 10)
