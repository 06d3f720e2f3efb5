def f(a, b):
    if a and b > 2:
        return 'both'
    if not a or b == 0:
        return 'neither'
    return 'mixed'
