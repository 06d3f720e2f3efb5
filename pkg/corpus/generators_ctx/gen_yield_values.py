def g(n):
    yield 'start'
    for i in range(n):
        yield i * 2
    yield 'end'
