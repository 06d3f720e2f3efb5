def f(xs, ys):
    merged = [*xs, *ys, 9]
    tup = (*ys, *xs)
    ss = {*xs, *ys}
    return merged, tup, sorted(ss, key=repr)
