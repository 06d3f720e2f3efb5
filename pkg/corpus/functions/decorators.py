def double_result(fn):
    def wrapper(x):
        return fn(x) * 2
    return wrapper

def tag(fn):
    fn.tagged = True
    return fn

@tag
@double_result
def f(x):
    return x + 1
