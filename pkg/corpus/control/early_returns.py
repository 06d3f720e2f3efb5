def f(a):
    if a < 0:
        return 'neg'
    if a == 0:
        return 'zero'
    return 'pos'
