class Flat:
    def __init__(self, rec):
        self.rec = rec

    def __enter__(self):
        self.rec.add('on')
        return None

    def __exit__(self, *exc):
        self.rec.add('off')
        return False

def f(rec, xs):
    with Flat(rec):
        xs.sort()
    return xs, rec.events
