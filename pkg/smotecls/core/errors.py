# smotecls/core/errors.py
from __future__ import annotations

from typing import Any, Dict, Optional


class SmoteClsError(ValueError):
    """Base for every error raised on bad input or an infeasible request.

    Subclasses ValueError so routers can keep mapping ValueError -> 400.
    """


class DataError(SmoteClsError):
    pass


class ConfigError(SmoteClsError):
    pass


class InsufficientSupportError(SmoteClsError):
    pass


class NoEligibleClusterError(SmoteClsError):
    pass


class DegenerateInputError(SmoteClsError):
    pass


class TrainingDivergedError(SmoteClsError):
    def __init__(
        self,
        message: str,
        epoch: Optional[int] = None,
        diagnostics: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message if epoch is None else f"{message} (epoch {epoch})")
        self.epoch = epoch
        self.diagnostics = diagnostics or {}
