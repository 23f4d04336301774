"""Input checks shared by the estimator wrappers and the CLI."""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

__all__ = [
    "check_bit_matrix",
    "check_bits",
    "check_probability",
    "all_bitstrings",
    "thread_count",
    "parallel_map",
]

T = TypeVar("T")
R = TypeVar("R")


def check_bits(bits: Sequence[int], length: int | None = None, name: str = "bits") -> tuple[int, ...]:
    out = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in out):
        raise ValueError(f"{name} must contain only 0/1, got {out}")
    if length is not None and len(out) != length:
        raise ValueError(f"{name} must have length {length}, got {len(out)}")
    return out


def check_bit_matrix(X, n_features: int | None = None) -> np.ndarray:
    """2-D uint8 array of 0/1 entries, one input per row."""
    arr = np.asarray(X)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D bit matrix, got shape {arr.shape}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("bit matrix entries must be 0 or 1")
    if n_features is not None and arr.shape[1] != n_features:
        raise ValueError(f"expected {n_features} columns, got {arr.shape[1]}")
    return arr.astype(np.uint8)


def check_probability(p: float, name: str = "probability") -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")
    return p


def all_bitstrings(n: int) -> Iterable[tuple[int, ...]]:
    return itertools.product((0, 1), repeat=n)


def thread_count() -> int:
    raw = os.environ.get("MAGICOMM_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"MAGICOMM_THREADS must be an integer, got {raw!r}") from None
    return min(8, os.cpu_count() or 1)


def parallel_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Order-preserving map over a thread pool capped by MAGICOMM_THREADS."""
    items = list(items)
    workers = thread_count()
    if workers == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
