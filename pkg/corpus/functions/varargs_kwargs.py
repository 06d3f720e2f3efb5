def f(*args, **kw):
    total = sum(args)
    keys = sorted(kw)
    return total, keys, [kw[k] for k in keys]
