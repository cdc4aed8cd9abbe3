"""Sums of exponentials, the common output type of the analytics."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import DegenerateSpectrumError
from ..linalg import EPS_DISTINCT


@dataclass(frozen=True)
class ExpCurve:
    """``t -> sum_i coeff_i * exp(rate_i * t)``.

    Terms with bit-identical rates are merged on construction; rates that
    differ by less than ``EPS_DISTINCT`` without being identical are
    rejected, since a curve built from them has lost its precision already.
    """

    terms: tuple[tuple[float, float], ...]
    label: str = ""

    def __post_init__(self) -> None:
        merged: dict[float, float] = {}
        for rate, coeff in self.terms:
            rate, coeff = float(rate), float(coeff)
            merged[rate] = merged.get(rate, 0.0) + coeff
        rates = sorted(merged)
        for r1, r2 in zip(rates, rates[1:]):
            if r2 - r1 <= EPS_DISTINCT:
                raise DegenerateSpectrumError(f"curve rates {r1!r} and {r2!r} are not distinct")
        object.__setattr__(self, "terms", tuple((r, merged[r]) for r in rates))

    @classmethod
    def of(cls, terms: Iterable[tuple[float, float]], label: str = "") -> "ExpCurve":
        return cls(tuple(terms), label)

    @property
    def rates(self) -> np.ndarray:
        return np.array([r for r, _ in self.terms])

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([c for _, c in self.terms])

    def coeff(self, rate: float) -> float:
        for r, c in self.terms:
            if r == rate:
                return c
        return 0.0

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if not self.terms:
            return np.zeros_like(t_arr) if t_arr.ndim else 0.0
        vals = np.exp(np.multiply.outer(t_arr, self.rates)) @ self.coeffs
        return vals if t_arr.ndim else float(vals)

    def sample(self, grid: Sequence[float]) -> list[tuple[float, float]]:
        return [(float(t), float(self(t))) for t in grid]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rate", "coeff"])
        for r, c in self.terms:
            w.writerow([repr(r), repr(c)])
        return buf.getvalue()

    def __str__(self) -> str:
        body = " + ".join(f"{c:.6g}*exp({r:.6g} t)" for r, c in self.terms) or "0"
        return f"{self.label}: {body}" if self.label else body
