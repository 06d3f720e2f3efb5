class Calc:
    '''tiny calculator'''

    factor = 3

    def times(self, x):
        return x * self.factor

def use(x):
    return Calc().times(x), Calc.__doc__
