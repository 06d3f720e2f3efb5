'''module docstring for the table below'''

TABLE = {'a': 1, 'b': 2}
DOUBLED = {k: v * 2 for k, v in TABLE.items()}

def lookup(key):
    return DOUBLED.get(key, 0)
