def f(n):
    x = n
    x += 3
    x *= 2
    x -= 1
    x //= 2
    x **= 2
    x %= 97
    x <<= 1
    x >>= 1
    x |= 8
    x &= 127
    x ^= 3
    return x
