"""
Report segments. A rendered report is a flat stream of ``str`` pieces,
line breaks and annotation markers; only the colored renderer looks at
the annotations.
"""


class Segment(object):
    pass


class SLine(Segment):
    __slots__ = ('indent', )

    def __init__(self, indent=0):
        assert isinstance(indent, int)
        self.indent = indent

    def __repr__(self):
        return 'SLine({})'.format(repr(self.indent))


class SAnnotationPush(Segment):
    __slots__ = ('value', )

    def __init__(self, value):
        self.value = value

    def __repr__(self):
        return 'SAnnotationPush({})'.format(repr(self.value))


class SAnnotationPop(Segment):
    __slots__ = ('value', )

    def __init__(self, value):
        self.value = value

    def __repr__(self):
        return 'SAnnotationPop({})'.format(repr(self.value))


def annotated(value, text):
    """``text`` wrapped in a push/pop pair for ``value``."""
    yield SAnnotationPush(value)
    yield text
    yield SAnnotationPop(value)
