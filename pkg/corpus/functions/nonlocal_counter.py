def make_counter(start):
    def bump(step=1):
        nonlocal start
        start += step
        return start
    return bump

def run_counter(n):
    bump = make_counter(100)
    out = []
    for _ in range(n):
        out.append(bump(2))
    return out
