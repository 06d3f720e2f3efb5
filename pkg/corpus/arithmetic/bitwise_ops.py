def f(a, b):
    return a & b, a | b, a ^ b, a << 2, b >> 1, ~a
