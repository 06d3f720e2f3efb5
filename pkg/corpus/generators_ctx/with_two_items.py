class Tag:
    def __init__(self, rec, label):
        self.rec = rec
        self.label = label

    def __enter__(self):
        self.rec.add('in-' + self.label)
        return self.label

    def __exit__(self, *exc):
        self.rec.add('out-' + self.label)
        return False

def f(rec):
    with Tag(rec, 'a') as x, Tag(rec, 'b') as y:
        rec.add(x + y)
    return rec.events
