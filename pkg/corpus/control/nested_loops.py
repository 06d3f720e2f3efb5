def f(n, m):
    grid = []
    for i in range(n):
        row = 0
        for j in range(m):
            if (i + j) % 3 == 0:
                continue
            row += i * j
        grid.append(row)
    return grid
