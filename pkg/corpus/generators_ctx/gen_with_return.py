def g(n):
    total = 0
    for i in range(n):
        if i == 3:
            return
        total += i
        yield total

def collect(n):
    return list(g(n))
