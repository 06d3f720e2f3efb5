class CM:
    def __init__(self, rec, swallow):
        self.rec = rec
        self.swallow = swallow

    def __enter__(self):
        self.rec.add('enter')
        return self.rec

    def __exit__(self, exc_type, exc, tb):
        self.rec.add('exit:' + (exc_type.__name__ if exc_type else 'none'))
        return self.swallow

def f(rec, blow_up):
    with CM(rec, True) as r:
        r.add('body')
        if blow_up:
            raise ValueError('inside')
        r.add('calm')
    return rec.events
