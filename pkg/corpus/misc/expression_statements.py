def f(rec, x):
    rec.add('first')
    x + 1
    rec.add(x)
    [x]
    return rec.events
