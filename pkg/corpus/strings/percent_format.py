def f(s, n):
    return '%s=%d (%05.1f)' % (s, n, n * 1.5)
