def f(a, b, c, d):
    low = a < b < c < d
    mixed = a <= b > c
    return low, mixed
