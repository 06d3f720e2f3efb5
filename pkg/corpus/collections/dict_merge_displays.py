def f(d1, d2):
    merged = {**d1, **d2, 'z': 99}
    return merged
