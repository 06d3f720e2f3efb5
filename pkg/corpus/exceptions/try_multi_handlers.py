def f(v):
    try:
        return 10 // int(v)
    except (ValueError, ZeroDivisionError):
        return 'bad-value'
    except TypeError:
        return 'bad-type'
