def f(xs, flag):
    if len(xs) > 1 and flag:
        return 'many+flag'
    if xs and flag == 0:
        return 'some'
    return 'rest'
