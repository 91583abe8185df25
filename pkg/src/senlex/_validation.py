"""Input validation helpers shared across the estimator surface."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Sequence


def check_text_list(X, name: str = "X") -> list[str]:
    """Coerce to a list of str, rejecting anything that is not text."""
    if isinstance(X, str):
        raise TypeError(f"{name} must be a sequence of strings, not a single string")
    try:
        items = list(X)
    except TypeError:
        raise TypeError(f"{name} must be an iterable of strings") from None
    for i, item in enumerate(items):
        if not isinstance(item, str):
            raise TypeError(f"{name}[{i}] is {type(item).__name__}, expected str")
    return items


def check_ratios(ratios: Sequence[float]) -> tuple[float, float, float]:
    """Validate a (train, dev, test) ratio triple."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3:
        raise ValueError(f"expected 3 split ratios, got {len(ratios)}")
    if any(r < 0 for r in ratios):
        raise ValueError(f"split ratios must be non-negative, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {sum(ratios)!r}")
    return ratios


def check_fraction(value: float, name: str, *, closed_top: bool = False) -> float:
    value = float(value)
    top_ok = value <= 1.0 if closed_top else value < 1.0
    if not (0.0 <= value and top_ok):
        bound = "[0, 1]" if closed_top else "[0, 1)"
        raise ValueError(f"{name} must be in {bound}, got {value}")
    return value


def require_file(path: str | os.PathLike, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"{what} not found: {p}")
    return p
