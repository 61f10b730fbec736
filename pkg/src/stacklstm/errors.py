"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: ConfigError / ContractError -> 2,
DataError (and subclasses) -> 3, NumericError -> 4.
"""


class StackLstmError(Exception):
    pass


class ConfigError(StackLstmError):
    """Bad run configuration: unknown keys, invalid sizes, task mismatch."""


class ContractError(StackLstmError, ValueError):
    """A documented precondition was violated by the caller."""


class DimensionError(ContractError):
    """Operand shapes do not conform for a primitive op."""


class NumericError(StackLstmError, ArithmeticError):
    """A forward op produced NaN/Inf, or perturbed evaluation left the finite domain."""


class DataError(StackLstmError):
    """Malformed input data."""


class ParseError(DataError):
    """Document cannot be parsed at all (bad JSON, bad checkpoint container)."""


class SchemaError(DataError):
    """Document parsed but violates the tree schema."""


class StructureError(DataError):
    """Token sequence is structurally invalid (unbalanced brackets)."""
