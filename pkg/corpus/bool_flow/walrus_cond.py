def f(v):
    if (n := len(v)) > 3:
        return n * 10
    return n
