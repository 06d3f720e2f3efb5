def f(x, limit):
    while x < limit:
        if x == 5:
            break
        x += 1
    else:
        x = -x
    return x
