def f(text):
    try:
        value = int(text)
    except ValueError:
        value = -1
    return value
