def inner(xs):
    yield from xs

def outer(a, b):
    yield from inner(a)
    yield from inner(b)
    yield 'tail'
