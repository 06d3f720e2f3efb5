def f(d, k):
    d[k] += 5
    lst = [1, 2, 3]
    lst[1] -= d[k]
    return d, lst
