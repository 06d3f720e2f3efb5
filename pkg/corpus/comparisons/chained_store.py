def f(a, b, c):
    ok = a < b < c
    if ok:
        return 'ascending'
    return 'not'
