def f(s):
    return s.strip().title().split()
