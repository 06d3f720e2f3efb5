def f(a, b):
    total = a + b * 2 - a // 2
    total = total % (b + 1)
    return total, a * -b, +a
