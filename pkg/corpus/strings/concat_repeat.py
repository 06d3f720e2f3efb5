def f(s, n):
    return s + 'x' * n, (s + '|') * 2
