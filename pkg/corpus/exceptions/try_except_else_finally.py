def f(rec, text):
    try:
        n = int(text)
    except ValueError as exc:
        rec.add('caught')
        n = -1
    else:
        rec.add('clean')
        n *= 2
    finally:
        rec.add('done')
    return n
