def outer(k):
    def middle(m):
        def inner(i):
            return k + m + i
        return inner(3)
    return middle(5)
