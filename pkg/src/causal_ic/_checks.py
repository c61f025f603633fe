"""Shared handling of identity checks for exact versus sampled inputs."""

from __future__ import annotations

from .errors import BoundaryParameter

# extracted values may overshoot [0, 1] by this much before it counts as an error
CLIP_WINDOW = 1e-7


class Checks:
    """Raise on identity violations, or collect warnings for sampled input."""

    def __init__(self, strict: bool):
        self.strict = strict
        self.warnings: list[str] = []

    def fail(self, exc: Exception):
        if self.strict:
            raise exc
        self.warnings.append(f"{type(exc).__name__}: {exc}")

    def unit(self, value: float, label: str) -> float:
        """Clip ``value`` into [0, 1], complaining when it lies well outside."""
        if value != value or value < -CLIP_WINDOW or value > 1.0 + CLIP_WINDOW:
            self.fail(BoundaryParameter(f"{label}={value:.10g} outside [0, 1]"))
            if value != value:
                return value
        return min(1.0, max(0.0, value))
