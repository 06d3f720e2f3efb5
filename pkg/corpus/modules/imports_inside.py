def f(x):
    import math
    import os.path as osp
    from math import sqrt, floor as flr
    return math.sqrt(x), sqrt(x), flr(2.7), osp.join('a', 'b')
