def f(v):
    a = b = v
    c = d = [v]
    c.append(b)
    return a, b, c, d
