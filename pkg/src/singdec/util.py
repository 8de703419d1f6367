"""Small shared helpers."""
import math


def iround(x: float) -> int:
    """Round half away from zero (for the nonnegative counts used here)."""
    return int(math.floor(x + 0.5))
