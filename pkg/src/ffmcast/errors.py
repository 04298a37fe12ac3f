"""Error types shared across the package."""

from __future__ import annotations


class TopologyError(ValueError):
    """Malformed topology document or reference to an unknown node/link."""


class InvalidPathError(ValueError):
    """A path does not chain head-to-tail or would corrupt a tree."""


class TagSpaceExhausted(RuntimeError):
    """No VLAN tags left for new backup trees (4094 is the ceiling)."""


class BudgetExceeded(RuntimeError):
    """Exhaustive enumeration would exceed the configured cap."""


class DataplaneError(RuntimeError):
    """Inconsistent switch state mutation (unknown group, bad reference)."""
