def f(c, a, b):
    value = a if c else b
    return value, (b if c else a)
