def f(s):
    return sorted({ch for ch in s if ch != ' '})
