def f(a, b, c, d):
    if a and b and c and d:
        return 4
    if a or b or c or d:
        return 1
    return 0
