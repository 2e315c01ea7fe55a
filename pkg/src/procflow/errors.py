"""Exception types shared across the package.

Every error carries a short ``category`` token so the CLI can report it in a
machine-readable form.
"""


class ProcflowError(Exception):
    category = "error"


class ValidationError(ProcflowError, ValueError):
    category = "validation"


class DataIntegrityError(ProcflowError, ValueError):
    category = "data-integrity"


class EmptyDatasetError(ProcflowError, ValueError):
    category = "empty-dataset"


class StratificationError(ProcflowError, ValueError):
    category = "stratification"


class ShapeError(ProcflowError, ValueError):
    category = "shape"


class ContractError(ProcflowError, RuntimeError):
    category = "contract"


class SuiteConfigError(ProcflowError, ValueError):
    category = "suite-config"


class ParseError(ProcflowError, ValueError):
    category = "parse"

    def __init__(self, message, path=None, line=None):
        super().__init__(message)
        self.path = path
        self.line = line


class ProcflowIOError(ProcflowError, OSError):
    category = "io"


class UsageError(ProcflowError):
    category = "usage"
