def f(rec, fail):
    try:
        try:
            if fail:
                raise OSError('boom')
            rec.add('fine')
        except:
            rec.add('swallow')
            raise
    except OSError:
        rec.add('outer')
    return rec.events
