"""Exception hierarchy shared by all qugeo modules.

Every exception carries a short ``category`` string; the command-line entry
point prints it as the first token of its one-line failure message.
"""


class QuGeoError(Exception):
    category = "error"


class ConfigurationError(QuGeoError, ValueError):
    category = "configuration"


class DataError(QuGeoError, ValueError):
    category = "data"


class FormatError(DataError):
    category = "format"


class NumericError(QuGeoError, ArithmeticError):
    category = "numeric"


class StabilityError(NumericError):
    category = "stability"
