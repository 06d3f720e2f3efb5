def f(a, b):
    return max(a if a > b else b, 0), min(a, b) if a else b
