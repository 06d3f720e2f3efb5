def f(x, y):
    q = x / (y + 1.0)
    r = x * y + 0.1
    return q, r, x - y, abs(-0.0 + y)
