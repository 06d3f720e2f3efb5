def f(a):
    if a > 10:
        r = 'big'
    elif a > 5:
        r = 'mid'
    elif a > 0:
        r = 'small'
    else:
        r = 'neg'
    return r
