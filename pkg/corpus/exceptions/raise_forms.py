def f(mode):
    try:
        if mode == 1:
            raise ValueError('plain')
        if mode == 2:
            raise KeyError('with-args')
        if mode == 3:
            try:
                raise ValueError('first')
            except ValueError as exc:
                raise RuntimeError('chained') from exc
        return 'no-raise'
    except ValueError:
        return 'value'
    except KeyError:
        return 'key'
    except RuntimeError:
        return 'runtime'
