def helper():
    pass

def f(flag):
    if flag:
        pass
    else:
        helper()
    return flag
