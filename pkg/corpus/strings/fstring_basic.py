def f(name, n):
    return f"hello {name}! n={n} next={n + 1}"
