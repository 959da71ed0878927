from io import StringIO

from .segments import SLine


def as_lines(segments):
    currline = []
    for segment in segments:
        if not isinstance(segment, SLine):
            currline.append(segment)
        else:
            yield currline
            currline = [segment]

    if currline:
        yield currline


def render_to_stream(stream, segments, newline='\n', separator=' '):
    """Writes the text of ``segments``; annotations are dropped."""
    for line in as_lines(list(segments)):
        for segment in line:
            if isinstance(segment, str):
                stream.write(segment)
            elif isinstance(segment, SLine):
                stream.write(newline + separator * segment.indent)


def render_to_str(segments, newline='\n', separator=' '):
    stream = StringIO()
    render_to_stream(stream, segments, newline, separator)
    return stream.getvalue()
