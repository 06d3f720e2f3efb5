def f(data, n):
    return data * n + b'\xff', data[::-1], len(data)
