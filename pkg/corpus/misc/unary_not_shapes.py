def f(a, xs):
    if not a:
        return 'zero'
    if not xs:
        return 'empty'
    return not (a and xs)
