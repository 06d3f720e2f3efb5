def f(a, b):
    t = (a, b, 3)
    l = [a, b]
    s = {a, b, a}
    d = {'k': a, b: 'v'}
    empty = (), [], {}
    return t, l, sorted(s, key=repr), d, empty
