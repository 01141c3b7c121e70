"""Exception hierarchy shared by all modules.

Each error carries an ``exit_code`` so the command-line runner can map
failures onto its documented exit statuses.
"""


class LatnkmError(Exception):
    exit_code = 1


class ConfigError(LatnkmError, ValueError):
    exit_code = 2


class InvalidData(LatnkmError, ValueError):
    exit_code = 3


class FormatError(InvalidData):
    """Malformed input file. ``row``/``column`` point at the offending cell when known."""

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ShapeError(LatnkmError, ValueError):
    exit_code = 3


class TooLarge(LatnkmError, ValueError):
    exit_code = 4


class NumericalError(LatnkmError, ArithmeticError):
    exit_code = 4


class SolverError(NumericalError):
    pass
