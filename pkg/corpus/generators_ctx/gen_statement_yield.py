def g(rec):
    got = yield 1
    rec.add(got)
    yield
    yield got * 2

def drive(rec):
    it = g(rec)
    first = next(it)
    second = it.send(21)
    third = next(it)
    return first, second, third, rec.events
