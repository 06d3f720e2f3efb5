def f(rec, x):
    try:
        rec.add('try')
        return 10 // x
    finally:
        rec.add('finally')
