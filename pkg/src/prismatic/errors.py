"""Error hierarchy with stable machine-readable codes.

Every error raised by this package maps to exactly one code; the HTTP layer
and the CLI reuse the same codes, so ``code`` doubles as the wire-level
error identifier.
"""

from __future__ import annotations

from typing import Any


class PrismaticError(Exception):
    code = "Internal"
    http_status = 500

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.details: dict[str, Any] = {k: v for k, v in details.items() if v is not None}

    @property
    def message(self) -> str:
        return str(self.args[0]) if self.args else self.code


class MalformedRow(PrismaticError):
    code = "MalformedRow"
    http_status = 400


class DuplicateDate(PrismaticError):
    code = "DuplicateDate"
    http_status = 400


class EmptyInput(PrismaticError):
    code = "EmptyInput"
    http_status = 400


class SchemaError(PrismaticError):
    code = "SchemaError"
    http_status = 400


class UnknownInstrument(PrismaticError):
    code = "UnknownInstrument"
    http_status = 404


class SeriesTooShort(PrismaticError):
    code = "SeriesTooShort"
    http_status = 422


class LengthMismatch(PrismaticError):
    code = "LengthMismatch"
    http_status = 422


class EmptyYear(PrismaticError):
    code = "EmptyYear"
    http_status = 404


class DegenerateView(PrismaticError):
    code = "DegenerateView"
    http_status = 422


class NumericalFailure(PrismaticError):
    code = "NumericalFailure"
    http_status = 500


class IndexOutOfRange(PrismaticError):
    code = "IndexOutOfRange"
    http_status = 422


class InvalidCell(PrismaticError):
    code = "InvalidCell"
    http_status = 422


class MissingBenchmark(PrismaticError):
    code = "MissingBenchmark"
    http_status = 409


class EmptyIndustry(PrismaticError):
    code = "EmptyIndustry"
    http_status = 404


class UnknownItem(PrismaticError):
    code = "UnknownItem"
    http_status = 404


class DuplicateItem(PrismaticError):
    code = "DuplicateItem"
    http_status = 409


class DuplicateMember(PrismaticError):
    code = "DuplicateMember"
    http_status = 409


class NotAMember(PrismaticError):
    code = "NotAMember"
    http_status = 404


class MustHaveProtected(PrismaticError):
    code = "MustHaveProtected"
    http_status = 409


class TooFewMembers(PrismaticError):
    code = "TooFewMembers"
    http_status = 422


class SessionNotFound(PrismaticError):
    code = "SessionNotFound"
    http_status = 404


class InvalidArgument(PrismaticError):
    code = "InvalidArgument"
    http_status = 422
