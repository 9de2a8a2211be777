"""Coefficient layout for the real and complex moment representations.

A function on the unit ball band-limited at order ``N`` is parameterized two
ways:

* a real vector ``c = (a^T, b^T)^T`` where ``a`` holds the coefficients of
  the real parts and ``b`` the coefficients of the imaginary parts of the
  basis functions with ``0 <= m <= l <= n <= N``, ``n - l`` even;
* a complex coefficient per basis function over the full index range
  ``-l <= m <= l``.

The entry ordering is lexicographic in ``(n, l, m)`` and frozen; files that
store coefficient vectors record ``LAYOUT_VERSION`` so readers can reject
incompatible layouts.  At the default order ``N = 6`` there are 50 entries,
hence ``dim(c) = 100``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

LAYOUT_VERSION = "ball-layout/1"

DEFAULT_ORDER = 6


@dataclass(frozen=True)
class MomentLayout:
    """Frozen index layout for coefficient vectors at maximum order ``N``."""

    N: int
    entries: tuple[tuple[int, int, int], ...] = field(init=False)
    complex_entries: tuple[tuple[int, int, int], ...] = field(init=False)

    def __post_init__(self) -> None:
        if self.N < 0:
            raise ValueError(f"order must be non-negative, got {self.N}")
        entries = []
        full = []
        for n in range(self.N + 1):
            for l in range(n % 2, n + 1, 2):
                for m in range(0, l + 1):
                    entries.append((n, l, m))
                for m in range(-l, l + 1):
                    full.append((n, l, m))
        object.__setattr__(self, "entries", tuple(entries))
        object.__setattr__(self, "complex_entries", tuple(full))

    @property
    def n_entries(self) -> int:
        return len(self.entries)

    @property
    def dim(self) -> int:
        """Length of the real coefficient vector (a-block then b-block)."""
        return 2 * len(self.entries)

    @property
    def version(self) -> str:
        return LAYOUT_VERSION

    def a_index(self, n: int, l: int, m: int) -> int:
        return self._entry_pos()[(n, l, m)]

    def b_index(self, n: int, l: int, m: int) -> int:
        return self.n_entries + self._entry_pos()[(n, l, m)]

    def complex_index(self, n: int, l: int, m: int) -> int:
        return self._complex_pos()[(n, l, m)]

    def _entry_pos(self) -> dict:
        return _entry_positions(self.N)

    def _complex_pos(self) -> dict:
        return _complex_positions(self.N)

    @property
    def m0_positions(self) -> np.ndarray:
        """Entry positions (into the a-block) whose order ``m`` is zero."""
        return np.array([i for i, (n, l, m) in enumerate(self.entries) if m == 0])

    @property
    def kernel_mask(self) -> np.ndarray:
        """Boolean mask over ``dim`` marking the axially-symmetric subspace.

        True exactly at a-block entries with ``m = 0``; a kernel that is
        symmetric about the north-pole axis has support only there.
        """
        mask = np.zeros(self.dim, dtype=bool)
        mask[self.m0_positions] = True
        return mask


@lru_cache(maxsize=None)
def get_layout(N: int = DEFAULT_ORDER) -> MomentLayout:
    return MomentLayout(N)


@lru_cache(maxsize=None)
def _entry_positions(N: int) -> dict:
    return {e: i for i, e in enumerate(get_layout(N).entries)}


@lru_cache(maxsize=None)
def _complex_positions(N: int) -> dict:
    return {e: i for i, e in enumerate(get_layout(N).complex_entries)}
