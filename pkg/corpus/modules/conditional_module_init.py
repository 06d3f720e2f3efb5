import sys

if sys.maxsize > 2 ** 32:
    MODE = 'wide'
else:
    MODE = 'narrow'

def get_mode():
    return MODE
