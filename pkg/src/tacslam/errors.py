'''
Module: errors.py
Description: Exception base shared by every tacslam subpackage.

Subpackages subclass TacSlamError next to the code that raises it
(e.g. tacslam.geometry.se3.AngleNearPi), so callers can catch one type
at the CLI boundary and still branch on the specific failure.
'''
from __future__ import annotations
from typing import Any


class TacSlamError(Exception):
    """Base tacslam error with optional context payload."""
    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.context = context

    def __getattr__(self, name: str) -> Any:
        # context keys read like attributes (err.angle, err.path, ...)
        context = self.__dict__.get("context", {})
        if name in context:
            return context[name]
        raise AttributeError(name)
