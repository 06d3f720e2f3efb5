def f(m):
    flat = [y for row in m for y in row]
    squared = [[y * y for y in row] for row in m]
    return flat, squared
