def f(xs):
    total = 0
    for x in xs:
        if x % 2:
            continue
        if x > 6:
            break
        total += x
    else:
        total = -total
    return total
