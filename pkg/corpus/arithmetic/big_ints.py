BASE = 123456789012345678901234567890

def f(shift):
    big = BASE << shift
    return big, big % 97, -BASE
