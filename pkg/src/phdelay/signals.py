"""Vector-valued port and history signals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StructuralError
from .operator_model import Term, TimeCoefficient


@dataclass(frozen=True, eq=False)
class Signal:
    """Either an analytic signal over the coefficient term library or a sampled one.

    Sampled signals are continuous and piecewise linear (hence locally H^1),
    constant beyond the first and last sample.
    """

    dim: int
    coefficient: TimeCoefficient | None = None
    times: np.ndarray | None = None
    values: np.ndarray | None = None

    @classmethod
    def analytic(cls, base, terms=()) -> "Signal":
        base = np.asarray(base).reshape(-1, 1)
        terms = tuple(Term(np.asarray(a).reshape(-1, 1), b, p) for a, b, p in terms)
        return cls(base.shape[0], coefficient=TimeCoefficient(base, terms))

    @classmethod
    def zero(cls, dim: int) -> "Signal":
        return cls.analytic(np.zeros(dim))

    @classmethod
    def sampled(cls, times, values) -> "Signal":
        times = np.asarray(times, dtype=float)
        values = np.asarray(values)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != times.shape[0]:
            raise StructuralError("sample times and values differ in length")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        return cls(values.shape[1], times=times, values=values)

    @property
    def is_analytic(self) -> bool:
        return self.coefficient is not None

    def __call__(self, t) -> np.ndarray:
        """Value at scalar ``t`` (shape ``(dim,)``) or at an array of times (shape ``(len(t), dim)``)."""
        return self.deriv(t, 0)

    def deriv(self, t, order: int = 1) -> np.ndarray:
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        if self.is_analytic:
            out = np.stack([self.coefficient.deriv(s, order)[:, 0] for s in ts])
        elif order == 0:
            out = np.stack([np.interp(ts, self.times, self.values[:, j].real)
                            + (1j * np.interp(ts, self.times, self.values[:, j].imag)
                               if np.iscomplexobj(self.values) else 0.0)
                            for j in range(self.dim)], axis=1)
        elif order == 1:
            slopes = np.diff(self.values, axis=0) / np.diff(self.times)[:, None]
            idx = np.clip(np.searchsorted(self.times, ts, side="right") - 1, 0, len(slopes) - 1)
            inside = (ts >= self.times[0]) & (ts <= self.times[-1])
            out = np.where(inside[:, None], slopes[idx], 0.0)
        else:
            raise ValueError("sampled signals only have a first derivative")
        return out[0] if scalar else out
