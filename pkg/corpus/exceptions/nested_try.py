def f(rec, mode):
    try:
        try:
            if mode == 0:
                raise ValueError('inner')
            if mode < 0:
                raise KeyError('deep')
            rec.add('ok')
        except ValueError:
            rec.add('inner-handler')
    except KeyError:
        rec.add('outer-handler')
    finally:
        rec.add('finish')
    return mode
