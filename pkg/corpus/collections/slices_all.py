def f(s):
    return s[1:], s[:3], s[1:5:2], s[:], s[::-1], s[-2:]
