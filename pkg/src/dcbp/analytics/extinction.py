"""Extinction probabilities as minimal fixed points of the offspring PGFs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ConvergenceError
from ..model import SdcbpModel, VdcbpModel, pgf_eval

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 1_000_000
# iterates may wobble by a few ulps once they have converged
_MONOTONE_SLACK = 1e-14


@dataclass(frozen=True, eq=False)
class FixedPoint:
    q: np.ndarray
    residual: float
    iterations: int


def minimal_fixed_point(
    model,
    active: Sequence[int],
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> FixedPoint:
    """Smallest ``q`` in ``[0,1]^active`` with ``q_k = f_k(s)``.

    ``s`` carries ``q`` on the ``active`` coordinates and 1 elsewhere
    (those types are ignored).  Jacobi iteration from zero climbs
    monotonically to the minimal solution; each step is checked for
    monotonicity.
    """
    active = list(active)
    s = np.ones(model.n_types)
    s[active] = 0.0
    q = np.zeros(len(active))
    for it in range(1, max_iter + 1):
        new = np.array([pgf_eval(model, k, s) for k in active])
        if np.any(new < q - _MONOTONE_SLACK):
            raise ConvergenceError(
                "fixed-point iteration lost monotonicity", last=new, residual=float(np.abs(new - q).max()), iterations=it
            )
        change = float(np.abs(new - q).max())
        q = new
        s[active] = q
        if change < tol:
            resid = float(np.abs(q - np.array([pgf_eval(model, k, s) for k in active])).max())
            return FixedPoint(q, resid, it)
    resid = float(np.abs(q - np.array([pgf_eval(model, k, s) for k in active])).max())
    raise ConvergenceError(
        f"extinction iteration did not converge in {max_iter} steps (residual {resid:.3g})",
        last=q,
        residual=resid,
        iterations=max_iter,
    )


@dataclass(frozen=True, eq=False)
class ExtinctionTable:
    """``q[k, i]``: probability that types ``0..i`` all die out from one type-``k`` particle."""

    q: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray


def extinction_probabilities(
    model: SdcbpModel, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> ExtinctionTable:
    n = model.n_types
    q = np.ones((n, n))
    resid = np.zeros(n)
    iters = np.zeros(n, dtype=int)
    for i in range(n):
        fp = minimal_fixed_point(model, range(i + 1), tol, max_iter)
        q[: i + 1, i] = fp.q
        resid[i] = fp.residual
        iters[i] = fp.iterations
    return ExtinctionTable(q, resid, iters)


@dataclass(frozen=True, eq=False)
class VdcbpExtinction:
    """``q1[j]``: class 1 dies out from class-1 type ``j``; ``q2[j]``: class 2
    dies out from class-2 type ``j``; ``q12[j]``: everything dies out from
    class-1 type ``j``."""

    q1: FixedPoint
    q2: FixedPoint
    q12: FixedPoint


def vdcbp_extinction(
    model: VdcbpModel, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> VdcbpExtinction:
    c1, c2 = model.classes
    q1 = minimal_fixed_point(model, c1, tol, max_iter)
    q2 = minimal_fixed_point(model, c2, tol, max_iter)
    full = minimal_fixed_point(model, c1 + c2, tol, max_iter)
    q12 = FixedPoint(full.q[: len(c1)], full.residual, full.iterations)
    return VdcbpExtinction(q1, q2, q12)
