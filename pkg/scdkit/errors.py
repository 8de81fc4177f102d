# scdkit/errors.py
"""scdkit の例外階層。CLI はこれを終了コードと JSON エラーに変換する。"""
from __future__ import annotations

from typing import Any


class ScdkitError(Exception):
    code = "error"
    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict[str, Any]:
        return {"error": self.code, "message": self.message, "details": self.details}


class InvalidParameterError(ScdkitError, ValueError):
    code = "invalid_parameter"
    exit_code = 2


class SchemaError(InvalidParameterError):
    code = "schema"


class BudgetExceededError(ScdkitError, RuntimeError):
    code = "budget_exceeded"
    exit_code = 3


class ForeignElementError(ScdkitError, ValueError):
    code = "foreign_element"


class NotRegularError(ScdkitError, ValueError):
    code = "not_regular"


class NotAnSnmfError(ScdkitError, ValueError):
    code = "not_an_snmf"


class NotAPerfectMatchingError(ScdkitError, ValueError):
    code = "not_a_perfect_matching"


class InvalidScdError(ScdkitError, ValueError):
    code = "invalid_scd"


class ZeroCountError(ScdkitError, RuntimeError):
    code = "zero_count"


class InfeasibleFlowError(ScdkitError, RuntimeError):
    """SNMF の存在は保証されているため、発生したら実装バグ"""
    code = "infeasible_flow"
