"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures without a
lookup table: 2 usage, 3 data/format, 4 network.
"""


class SucError(Exception):
    exit_code = 3


# sbox_lab
class InvalidSBox(SucError, ValueError):
    pass


class NotBijective(InvalidSBox):
    pass


class WrongLength(SucError, ValueError):
    pass


class FilterExhausted(SucError, RuntimeError):
    pass


class CacheWriteFailure(SucError, OSError):
    pass


# ciphers
class IndexOutOfRange(SucError, IndexError):
    pass


class InvalidSpec(SucError, ValueError):
    pass


# genie
class PayloadTooLarge(SucError, ValueError):
    pass


class AlreadyLocked(SucError, RuntimeError):
    pass


class MalformedDirectory(SucError, ValueError):
    pass


class NotPersonalized(SucError, RuntimeError):
    pass


class DefaultTemplateNotPersonalized(NotPersonalized):
    pass


class TrngDestroyed(SucError, RuntimeError):
    pass


# protocol
class DuplicateChallengeRetryExceeded(SucError, RuntimeError):
    pass


class UnknownSerial(SucError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class ParseError(SucError, ValueError):
    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


class DuplicateIndex(ParseError):
    pass


class NetworkError(SucError):
    exit_code = 4


class ChannelFailure(NetworkError, ConnectionError):
    pass


class ProtocolTimeout(NetworkError, TimeoutError):
    pass


class BindFailure(NetworkError, OSError):
    pass


class ProtocolViolation(NetworkError):
    pass


# analysis
class ExactTermUnavailable(SucError, ValueError):
    pass


class IoFailure(SucError, OSError):
    pass
