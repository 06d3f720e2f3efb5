counter = 0

def bump():
    global counter
    counter += 1
    return counter

def cycle(n):
    global counter
    counter = 0
    return [bump() for _ in range(n)]
