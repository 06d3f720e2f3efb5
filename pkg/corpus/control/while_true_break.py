def f(x):
    while True:
        x -= 2
        if x < 3:
            break
    return x
