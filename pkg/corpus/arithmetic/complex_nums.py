def f(x):
    z = (1.0 + 2.0j) * x
    w = z + 3.5j
    return z, w, w.real, w.imag
