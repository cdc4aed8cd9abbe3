"""Two-class vector process: growth rates, martingale, expected class-2 counts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ArgumentError, DegenerateSpectrumError
from ..linalg import EPS_DISTINCT, PerronData, m_matrix_inverse, perron, resolvent
from ..model import VdcbpModel, blocks
from .curves import ExpCurve


@dataclass(frozen=True, eq=False)
class Growth:
    alpha1: float
    xi1L: np.ndarray
    xi1R: np.ndarray
    alpha2: float
    xi2L: np.ndarray
    xi2R: np.ndarray

    def __iter__(self):
        return iter((self.alpha1, self.xi1L, self.xi1R, self.alpha2, self.xi2L, self.xi2R))


def vdcbp_growth(model: VdcbpModel) -> Growth:
    a11, _, a22 = blocks(model)
    p1: PerronData = perron(a11)
    p2: PerronData = perron(a22)
    return Growth(p1.root, p1.left, p1.right, p2.root, p2.left, p2.right)


def cross_matrix(model: VdcbpModel, growth: Growth | None = None, eps: float = EPS_DISTINCT) -> np.ndarray:
    """``(alpha2 I - A11)^{-1} A12``.

    When ``alpha1 < alpha2`` the inverse is an M-matrix inverse and is
    checked to be nonnegative; otherwise it is a plain solve.
    """
    g = growth or vdcbp_growth(model)
    if abs(g.alpha1 - g.alpha2) <= eps:
        raise DegenerateSpectrumError(f"alpha1 = alpha2 = {g.alpha1!r}")
    a11, a12, _ = blocks(model)
    inv = m_matrix_inverse(g.alpha2, a11, eps) if g.alpha1 < g.alpha2 else resolvent(g.alpha2, a11, eps)
    return inv @ a12


def vdcbp_martingale_value(model: VdcbpModel, x: Sequence[float], y: Sequence[float], t: float) -> float:
    """``exp(-alpha2 t) (Y . xi2R + X . (alpha2 I - A11)^{-1} A12 xi2R)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (model.n,) or y.shape != (model.m,):
        raise ArgumentError(f"expected X of length {model.n} and Y of length {model.m}")
    g = vdcbp_growth(model)
    c = cross_matrix(model, g) @ g.xi2R
    return float(np.exp(-g.alpha2 * t) * (y @ g.xi2R + x @ c))


def _spectral(a: np.ndarray, name: str, eps: float) -> list[tuple[float, np.ndarray]]:
    w, v = np.linalg.eig(a)
    if np.any(np.abs(w.imag) > 1e-10):
        raise DegenerateSpectrumError(f"{name} has a complex spectrum")
    w = w.real
    v = v.real
    s = np.sort(w)
    if np.any(np.diff(s) <= eps):
        raise DegenerateSpectrumError(f"{name} has a repeated eigenvalue")
    vinv = np.linalg.inv(v)
    return [(float(w[i]), np.outer(v[:, i], vinv[i, :])) for i in range(len(w))]


def vdcbp_expected_y(
    model: VdcbpModel, start: int, form: str = "exact", eps: float = EPS_DISTINCT
) -> list[ExpCurve]:
    """``E[Y_l(t)]`` for each class-2 type ``l`` from one class-1 ``start`` particle.

    ``form="exact"`` expands the off-diagonal block of ``exp(A t)`` with the
    spectral projectors ``P_a`` of ``A11`` and ``Q_b`` of ``A22``::

        sum_{a,b} (P_a A12 Q_b)[start, l] (exp(nu_b t) - exp(mu_a t)) / (nu_b - mu_a)

    ``form="two-term"`` returns ``h_l exp(alpha2 t) - d_l exp(alpha1 t)`` with
    ``h = e_start C`` and ``d = xi1R[start] xi1L C``, ``C = (alpha2 I - A11)^{-1} A12``.
    That is the long-run approximation; it is exact when both classes are
    single types.
    """
    if not 0 <= start < model.n:
        raise ArgumentError(f"start type {start} is not in class 1 (0..{model.n - 1})")
    labels = [f"E[Y_{l + 1}(t)] from type {start + 1}" for l in range(model.m)]
    if form == "two-term":
        g = vdcbp_growth(model)
        c = cross_matrix(model, g, eps)
        h = c[start]
        d = g.xi1R[start] * (g.xi1L @ c)
        return [ExpCurve(((g.alpha2, h[l]), (g.alpha1, -d[l])), labels[l]) for l in range(model.m)]
    if form != "exact":
        raise ArgumentError(f"unknown form {form!r}")
    a11, a12, a22 = blocks(model)
    p = _spectral(a11, "A11", eps)
    q = _spectral(a22, "A22", eps)
    terms: list[list[tuple[float, float]]] = [[] for _ in range(model.m)]
    for mu, pa in p:
        for nu, qb in q:
            if abs(nu - mu) <= eps:
                raise DegenerateSpectrumError(f"A11 and A22 share the eigenvalue {mu!r}")
            row = (pa @ a12 @ qb)[start] / (nu - mu)
            for l in range(model.m):
                terms[l].append((nu, row[l]))
                terms[l].append((mu, -row[l]))
    return [ExpCurve(tuple(terms[l]), labels[l]) for l in range(model.m)]
