class SlideCompressError(Exception):
    """Base class for every error raised by slidecompress."""


class ShapeError(SlideCompressError, ValueError):
    def __init__(self, message, *shapes):
        if shapes:
            message = '{} (shapes: {})'.format(
                message,
                ', '.join(str(tuple(shape)) for shape in shapes)
            )
        super().__init__(message)
        self.shapes = tuple(tuple(shape) for shape in shapes)


class ConfigurationError(SlideCompressError, ValueError):
    pass


class ConfigError(ConfigurationError):
    """Raised while parsing a configuration file."""

    def __init__(self, message, lineno=None, key=None):
        if lineno is not None:
            message = 'line {}: {}'.format(lineno, message)
        super().__init__(message)
        self.lineno = lineno
        self.key = key


class ContractError(SlideCompressError, ValueError):
    pass


class LengthError(SlideCompressError, ValueError):
    pass


class TilingError(SlideCompressError, ValueError):
    pass


class TokenIndexError(SlideCompressError, IndexError):
    pass


class FormatError(SlideCompressError, ValueError):
    def __init__(self, message, path=None, offset=None):
        parts = [message]
        if path is not None:
            parts.append('file {}'.format(path))
        if offset is not None:
            parts.append('offset {}'.format(offset))
        super().__init__(', '.join(parts))
        self.path = path
        self.offset = offset


class EvaluationError(SlideCompressError, LookupError):
    def __init__(self, message, record_ids=()):
        record_ids = list(record_ids)
        if record_ids:
            shown = ', '.join(record_ids[:20])
            if len(record_ids) > 20:
                shown += ', ... ({} more)'.format(len(record_ids) - 20)
            message = '{}: {}'.format(message, shown)
        super().__init__(message)
        self.record_ids = record_ids


class NumericError(SlideCompressError, ArithmeticError):
    pass
