def f(text):
    try:
        n = int(text)
    except ValueError:
        n = 0
    else:
        n += 100
    return n
