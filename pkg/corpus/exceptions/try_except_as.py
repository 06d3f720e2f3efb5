def f(d, k):
    try:
        return d[k]
    except KeyError as exc:
        return 'missing:' + repr(exc.args[0])
