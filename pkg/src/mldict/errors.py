"""Exception hierarchy. Every error raised on bad input or bad files derives
from :class:`MLDictError` so callers (and the CLI exit-code table) can
distinguish them."""


class MLDictError(Exception):
    exit_code = 1


class InputError(MLDictError, ValueError):
    exit_code = 2


class FormatError(MLDictError):
    exit_code = 3


class VersionError(FormatError):
    pass


class TruncationError(FormatError):
    pass


class CorruptionError(MLDictError):
    exit_code = 4


class ChecksumError(CorruptionError):
    pass


class WrongDictionaryError(MLDictError):
    exit_code = 5
