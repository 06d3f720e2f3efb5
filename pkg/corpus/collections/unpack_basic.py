def f(v):
    a, b, c = v
    b, a = a, b
    return a, b, c
