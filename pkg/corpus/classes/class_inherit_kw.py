class Base:
    def ping(self):
        return 'base'

class Meta(type):
    pass

class Child(Base, metaclass=Meta):
    def ping(self):
        return 'child+' + super().ping()

def use():
    return Child().ping(), type(Child).__name__
