def f(it):
    seen = []
    while next(it, 0):
        seen.append(len(seen))
    return seen
