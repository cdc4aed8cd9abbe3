"""Martingale and expectation coefficients of the scalar decomposable process.

With ``B`` the upper-triangular generator and ``alpha_i = B_ii``, the
coefficient of type ``i`` in the type-``m`` martingale is a sum over
increasing chains ``i = J_0 < J_1 < ... < J_k = m``::

    a_i^m = sum_chains  prod_r B[J_r, J_{r+1}] / prod_{r < k} (alpha_m - alpha_{J_r})

so ``sum_i a_i^m X_i(t) exp(-alpha_m t)`` is a martingale.  The columns
``a^j`` stacked side by side form a unit upper-triangular ``R`` with
``B R = R diag(alpha)``, hence ``E[X_m(t) | X_0 = e_k] = sum_j a_k^j
L_{jm} exp(alpha_j t)`` where ``L = R^{-1}`` is again a chain sum with
alternating signs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..errors import ArgumentError, DegenerateSpectrumError
from ..linalg import EPS_DISTINCT
from ..model import SdcbpModel, generator_matrix
from .curves import ExpCurve


@dataclass(frozen=True, eq=False)
class MartingaleCoeffs:
    m: int
    a: np.ndarray
    alpha_m: float


def _generator(model_or_b: Union[SdcbpModel, np.ndarray]) -> np.ndarray:
    if isinstance(model_or_b, SdcbpModel):
        return generator_matrix(model_or_b)
    b = np.asarray(model_or_b, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ArgumentError(f"expected a square generator, got shape {b.shape}")
    if np.any(np.tril(b, -1) != 0):
        raise ArgumentError("generator is not upper triangular")
    return b


def _check_index(b: np.ndarray, *idx: int) -> None:
    for i in idx:
        if not 0 <= i < b.shape[0]:
            raise ArgumentError(f"type index {i} outside 0..{b.shape[0] - 1}")


def _chains(i: int, m: int):
    inner = range(i + 1, m)
    for k in range(len(inner) + 1):
        for mid in itertools.combinations(inner, k):
            yield (i, *mid, m)


def _a(b: np.ndarray, i: int, m: int, eps: float) -> float:
    if i == m:
        return 1.0
    alpha = np.diag(b)
    total = 0.0
    for chain in _chains(i, m):
        w = 1.0
        for u, v in zip(chain, chain[1:]):
            w *= b[u, v]
        if w == 0.0:
            continue
        for u in chain[:-1]:
            gap = alpha[m] - alpha[u]
            if abs(gap) <= eps:
                raise DegenerateSpectrumError(
                    f"alpha_{u} and alpha_{m} coincide ({alpha[u]!r}) on a coupled chain"
                )
            w /= gap
        total += w
    return total


def martingale_matrix(model_or_b, upto: int | None = None, eps: float = EPS_DISTINCT) -> np.ndarray:
    """Unit upper-triangular ``R`` with ``R[i, m] = a_i^m``."""
    b = _generator(model_or_b)
    n = b.shape[0] if upto is None else upto + 1
    r = np.eye(n)
    for m in range(n):
        for i in range(m):
            r[i, m] = _a(b, i, m, eps)
    return r


def _inverse_chain(r: np.ndarray, j: int, m: int) -> float:
    """``(R^{-1})_{jm}`` for unit upper-triangular ``R`` by signed chain sums."""
    if j == m:
        return 1.0
    total = 0.0
    for chain in _chains(j, m):
        w = 1.0
        for u, v in zip(chain, chain[1:]):
            w *= r[u, v]
            if w == 0.0:
                break
        if w != 0.0:
            total += (-1.0) ** (len(chain) - 1) * w
    return total


def martingale_coeffs(model: Union[SdcbpModel, np.ndarray], m: int, eps: float = EPS_DISTINCT) -> MartingaleCoeffs:
    """Coefficients ``a_0^m, ..., a_m^m`` (0-based) of the type-``m`` martingale."""
    b = _generator(model)
    _check_index(b, m)
    a = np.array([_a(b, i, m, eps) for i in range(m + 1)])
    return MartingaleCoeffs(m, a, float(b[m, m]))


def expectation_curve(model: Union[SdcbpModel, np.ndarray], start: int, target: int, eps: float = EPS_DISTINCT) -> ExpCurve:
    """``E[X_target(t)]`` from one ``start`` particle as a sum of exponentials."""
    b = _generator(model)
    _check_index(b, start, target)
    label = f"E[X_{target + 1}(t)] from type {start + 1}"
    if start > target:
        return ExpCurve((), label)
    alpha = np.diag(b)
    sub = b[start : target + 1, start : target + 1]
    r = martingale_matrix(sub, eps=eps)
    last = target - start
    terms = []
    for j in range(last + 1):
        p = r[0, j] * _inverse_chain(r, j, last)
        if p != 0.0:
            terms.append((alpha[start + j], p))
    return ExpCurve(tuple(terms), label)


def expectation_coeffs(model: Union[SdcbpModel, np.ndarray], m: int, eps: float = EPS_DISTINCT) -> ExpCurve:
    """Curve for ``E[X_m(t)]`` from one type-0 particle.

    The ``alpha_m`` coefficient is ``a_0^m``; for ``j < m`` it is
    ``P_j^m = a_0^j (R^{-1})_{jm}``, e.g. ``P_{m-1}^m = -a_0^{m-1} a_{m-1}^m``.
    """
    return expectation_curve(model, 0, m, eps)


def expected_population(model: Union[SdcbpModel, np.ndarray], start: int, target: int, t: float) -> float:
    return float(expectation_curve(model, start, target)(t))
