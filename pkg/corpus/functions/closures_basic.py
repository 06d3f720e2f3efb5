def f(base):
    def add(n):
        return base + n
    return add
