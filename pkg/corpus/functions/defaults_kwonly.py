def f(a, b=10, *, k=3, j=4):
    return a + b + k * j
