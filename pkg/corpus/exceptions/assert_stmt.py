def f(x):
    assert x > 0, 'needs positive'
    assert x != 3
    try:
        assert x > 2, 'too small'
        return 'big'
    except AssertionError as exc:
        return 'assert:' + str(exc.args[0] if exc.args else '')
