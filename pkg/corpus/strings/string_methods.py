def f(s):
    parts = s.lower().split()
    joined = '-'.join(parts)
    return joined, s.upper(), s.startswith('S'), joined.replace('-', '_')
