def f(z):
    return z.real, z.imag, z.conjugate().imag, (3).bit_length()
