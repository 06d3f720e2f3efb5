def f(x):
    '''Double the input, because the docstring says so.'''
    return x * 2
