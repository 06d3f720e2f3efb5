class Box:
    kind = 'box'

    def __init__(self, v):
        self.v = v

    def get(self):
        return self.v

def use(n):
    b = Box(n)
    return b.get(), Box.kind, b.kind
