def f(n):
    out = []
    out.append(n)
    out.extend(range(n))
    out.insert(0, 'head')
    return out
