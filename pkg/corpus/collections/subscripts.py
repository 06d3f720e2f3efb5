def f(d, k, i):
    row = d[k]
    row[i] = row[i] + 10
    d['new'] = row[-1]
    return d, row[i]
