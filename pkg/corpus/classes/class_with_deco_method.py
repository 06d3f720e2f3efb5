class Registry:
    items = []

    @staticmethod
    def add(x):
        Registry.items.append(x)
        return len(Registry.items)

    @classmethod
    def kind(cls):
        return cls.__name__

def use():
    Registry.items = []
    n = Registry.add('a')
    return n, Registry.kind(), Registry.items
