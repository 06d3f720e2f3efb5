def helper(a, b=0, c=0):
    return a * 100 + b * 10 + c

def f(x):
    return helper(x, c=2, b=1), helper(b=x, a=0)
