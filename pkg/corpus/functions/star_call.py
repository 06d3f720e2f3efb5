def f(fn, args, kw):
    return fn(*args, **kw)
