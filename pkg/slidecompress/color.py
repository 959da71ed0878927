import os

import colorful
from pygments import styles, token
from pygments.style import Style
from pygments.token import Comment, Generic, Keyword, Name, Number, Text

from .render import as_lines
from .segments import SAnnotationPop, SAnnotationPush, SLine
from .syntax import Token

_SYNTAX_TOKEN_TO_PYGMENTS_TOKEN = {
    Token.HEADER: token.Comment.Single,
    Token.KEY: token.Name.Variable,
    Token.CATEGORY: token.Name.Entity,
    Token.NUMBER_INT: token.Number.Integer,
    Token.NUMBER_FLOAT: token.Number.Float,
    Token.SUMMARY: token.Keyword.Constant,
    Token.KIND: token.Name.Function,
    Token.WARNING: token.Generic.Error,
}


# Colors from GitHub's MIT-licensed light syntax theme.
class GitHubLightStyle(Style):
    background_color = "#ffffff"
    highlight_color = "#fafbfc"

    styles = {
        Text:                      "#24292e",
        Comment:                   "#6a737d",
        Keyword:                   "#d73a49",
        Keyword.Constant:          "bold #005cc5",
        Name:                      "#6f42c1",
        Name.Entity:               "#6f42c1",
        Name.Function:             "#6f42c1",
        Name.Variable:             "#e36209",
        Number:                    "#005cc5",
        Generic.Error:             "bold #b31d28",
    }


default_dark_style = styles.get_style_by_name('monokai')
default_light_style = GitHubLightStyle


def detect_light_background(environ=None):
    """``True``/``False`` from ``COLORFGBG`` or the
    ``SLIDECOMPRESS_LIGHT_BACKGROUND`` override, ``None`` if unknown."""
    environ = os.environ if environ is None else environ
    is_light_bg = None

    colorfgbg = environ.get('COLORFGBG', '')
    try:
        fg, bg = map(int, colorfgbg.split(';', 1))
        if bg > fg:
            is_light_bg = True
        if fg > bg:
            is_light_bg = False
    except ValueError:
        pass

    bg_override = environ.get('SLIDECOMPRESS_LIGHT_BACKGROUND')
    if bg_override is not None:
        is_light_bg = bool(bg_override)
        if bg_override == '0' or bg_override.lower() == 'false':
            is_light_bg = False
    return is_light_bg


default_style = default_light_style if detect_light_background() else default_dark_style


def set_default_style(style):
    """Sets the style used by ``colored_render_to_stream`` when none is given.

    :param style: the style to set, either subclass of
                  ``pygments.styles.Style`` or one of ``'dark'``, ``'light'``
    """
    global default_style
    if style == 'dark':
        style = default_dark_style
    elif style == 'light':
        style = default_light_style

    if not isinstance(style, type) or not issubclass(style, Style):
        raise TypeError(
            "style must be a subclass of pygments.styles.Style or "
            "one of 'dark', 'light'. Got {}".format(repr(style))
        )
    default_style = style


def styleattrs_to_colorful(attrs):
    c = colorful.reset
    if attrs['color'] or attrs['bgcolor']:
        # colorful takes hex colors only through palette entries.
        accessor = ''
        if attrs['color']:
            colorful.update_palette({'slidecompressCurrFg': attrs['color']})
            accessor = 'slidecompressCurrFg'
        if attrs['bgcolor']:
            colorful.update_palette({'slidecompressCurrBg': attrs['bgcolor']})
            accessor += '_on_slidecompressCurrBg'
        c &= getattr(colorful, accessor)
    if attrs['bold']:
        c &= colorful.bold
    if attrs['italic']:
        c &= colorful.italic
    if attrs['underline']:
        c &= colorful.underline
    return c


def colored_render_to_stream(stream, segments, style=None, newline='\n', separator=' '):
    if style is None:
        style = default_style

    color_cache = {}
    colorstack = []

    for line in as_lines(list(segments)):
        for segment in line:
            if isinstance(segment, str):
                stream.write(segment)
            elif isinstance(segment, SLine):
                stream.write(newline + separator * segment.indent)
            elif isinstance(segment, SAnnotationPush):
                if isinstance(segment.value, Token):
                    try:
                        color = color_cache[segment.value]
                    except KeyError:
                        pygments_token = _SYNTAX_TOKEN_TO_PYGMENTS_TOKEN[segment.value]
                        color = styleattrs_to_colorful(style.style_for_token(pygments_token))
                        color_cache[segment.value] = color

                    colorstack.append(color)
                    stream.write(str(color))

            elif isinstance(segment, SAnnotationPop):
                try:
                    colorstack.pop()
                except IndexError:
                    continue

                if colorstack:
                    stream.write(str(colorstack[-1]))
                else:
                    stream.write(str(colorful.reset))

    if colorstack:
        stream.write(str(colorful.reset))
