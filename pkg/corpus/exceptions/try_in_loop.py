def f(rec, items):
    out = []
    for item in items:
        try:
            out.append(int(item))
        except ValueError:
            rec.add('skip')
            continue
        finally:
            rec.add('step')
    return out
