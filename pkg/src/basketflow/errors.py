"""Exception types. Each carries the CLI exit code it maps to."""


class BasketflowError(Exception):
    exit_code = 5


class ValidationError(BasketflowError, ValueError):
    """A parameter or config value is out of its allowed range."""

    exit_code = 2

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class InputError(BasketflowError):
    exit_code = 3


class SchemaError(InputError):
    pass


class EmptyResultError(BasketflowError):
    exit_code = 4


class InvariantError(BasketflowError):
    exit_code = 5
