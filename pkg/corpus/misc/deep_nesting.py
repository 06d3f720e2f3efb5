def f(x):
    if x > 0:
        if x > 5:
            for i in range(3):
                if i == x:
                    break
                x += i
        else:
            while x < 5:
                x += 2
        return x
    try:
        return -x
    finally:
        pass
