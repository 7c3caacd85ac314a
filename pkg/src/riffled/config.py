"""Size limits for dense (enumerate-everything) computations."""

from __future__ import annotations

import os

DEFAULT_MAX_N = 10
HARD_MAX_N = 12
DEFAULT_MAX_FOURIER_N = 7


class CapError(ValueError):
    """Raised when a request would enumerate a group that is too large."""


def max_dense_n() -> int:
    """Dense cap, overridable through RIFFLE_MAX_N (validated)."""
    raw = os.environ.get("RIFFLE_MAX_N")
    if raw is None or raw == "":
        return DEFAULT_MAX_N
    try:
        value = int(raw)
    except ValueError:
        raise CapError(f"RIFFLE_MAX_N must be an integer, got {raw!r}") from None
    if not 1 <= value <= HARD_MAX_N:
        raise CapError(f"RIFFLE_MAX_N must lie in 1..{HARD_MAX_N}, got {value}")
    return value


def check_dense_n(n: int, what: str = "dense enumeration") -> None:
    cap = max_dense_n()
    if n > cap:
        raise CapError(f"{what} refused for n={n}: the cap is n <= {cap} (set RIFFLE_MAX_N to change it)")
