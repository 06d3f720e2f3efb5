def f(a, b, c):
    x = a and b or c
    y = a or b and c
    z = not a
    return x, y, z
