def f(xs, needle):
    for x in xs:
        if x == needle:
            found = True
            break
    else:
        found = False
    return found
