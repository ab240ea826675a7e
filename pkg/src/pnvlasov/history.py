"""Time-ordered frame storage for retarded-time evaluation.

A history holds per-frame particle states plus whatever per-particle field
columns the owning solver records, packed into (F, N, ...) arrays for the
retarded-summation kernels.  Frames must be appended in strictly increasing
time order with constant particle count.
"""
from __future__ import annotations

import numpy as np

from .errors import InsufficientHistoryError, InvalidInputError


class HistoryBuffer:
    def __init__(self):
        self._times: list[float] = []
        self._cols: dict[str, list[np.ndarray]] = {}
        self._packed: dict[str, np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self._times)

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self._times)

    @property
    def t_last(self) -> float:
        return self._times[-1] if self._times else np.nan

    def append(self, t: float, **cols) -> None:
        if self._times and t <= self._times[-1] + 1e-15:
            raise InvalidInputError("frames must advance in time")
        if self._times and set(cols) != set(self._cols):
            raise InvalidInputError("frame columns must stay fixed")
        self._times.append(float(t))
        for name, arr in cols.items():
            self._cols.setdefault(name, []).append(
                np.ascontiguousarray(arr, dtype=float))
        self._packed = None

    def col(self, name: str) -> np.ndarray:
        """Packed (F, ...) array of one column."""
        if self._packed is None:
            self._packed = {}
        if name not in self._packed:
            self._packed[name] = np.ascontiguousarray(np.stack(self._cols[name]))
        return self._packed[name]

    def require_span(self, t0: float, t1: float) -> None:
        if not self._times or self._times[0] > t0 + 1e-12 \
                or self._times[-1] < t1 - 1e-12:
            have = (self._times[0], self._times[-1]) if self._times else None
            raise InsufficientHistoryError(
                f"history covers {have}, need [{t0}, {t1}]")

    def bracket(self, t: float) -> tuple[int, float]:
        """Frame index j and fraction such that t = t_j + frac * (t_{j+1}-t_j)."""
        times = self.times
        j = int(np.searchsorted(times, t, side="right") - 1)
        j = min(max(j, 0), len(times) - 2)
        frac = (t - times[j]) / (times[j + 1] - times[j])
        return j, frac

    def interp(self, name: str, t: float, dot_name: str | None = None):
        """Value of a column at time t: cubic Hermite when a slope column is
        recorded, linear otherwise."""
        times = self.times
        if len(times) == 1:
            return self.col(name)[0]
        j, u = self.bracket(t)
        a = self.col(name)
        y0, y1 = a[j], a[j + 1]
        if dot_name is None:
            return (1 - u) * y0 + u * y1
        h = times[j + 1] - times[j]
        d = self.col(dot_name)
        d0, d1 = d[j] * h, d[j + 1] * h
        h00 = 2 * u**3 - 3 * u**2 + 1
        h10 = u**3 - 2 * u**2 + u
        h01 = -2 * u**3 + 3 * u**2
        h11 = u**3 - u**2
        return h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1
