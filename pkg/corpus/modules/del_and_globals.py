_tmp = ['scratch']
FINAL = len(_tmp)
del _tmp

def probe():
    return FINAL, '_tmp' in globals()
