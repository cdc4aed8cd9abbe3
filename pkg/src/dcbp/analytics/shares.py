"""Expected number of shares in the type-changing process.

A share is one new offspring; type changes are not counted.  ``y_l(t)``
is the expected number of shares (of either class) by time ``t`` in the
tree grown from one type-``l`` particle.  Conditioning on the first
transition gives the fixed-point equation

    y_l(t) = int_0^t lambda_v e^{-lambda_v s} [theta sum_k a_lk y_k(t-s)
             + (1-theta) sum_k m_lk (1 + y_k(t-s))] ds

whose three-exponential solution ``g_l + h_l e^{alpha_e t} + o_l
e^{alpha_bar t}`` is computed here.  For exclusive starts the curve is
``h^e_l (e^{alpha_e t} - 1)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError, DegenerateSpectrumError, SingularityError
from ..linalg import EPS_DISTINCT, matexp_reference
from ..model import TcvdbpModel
from .curves import ExpCurve


@dataclass(frozen=True, eq=False)
class ShareParts:
    """Blocks of a type-changing model that the share formulas use."""

    theta: float
    lambda_v: float
    a_o: np.ndarray  # theta a_mx + (1-theta) m_mx
    a_x: np.ndarray  # theta a_mx,ex + (1-theta) m_mx,ex
    a_e: np.ndarray  # theta a_ex + (1-theta) m_ex
    s: np.ndarray  # mean offspring per share, each type
    alpha_e: float
    alpha_bar: float


def share_parts(model: TcvdbpModel) -> ShareParts:
    M = model.mixed
    emb = model.embedded_means()
    s = model.share_means().sum(axis=1)
    a_e = emb[M:, M:]
    a_o = emb[:M, :M]
    g_ex = model.lambda_v * (a_e - np.eye(model.exclusive))
    alpha_e = float(np.linalg.eigvals(g_ex).real.max())
    alpha_bar = float(model.lambda_v * (np.linalg.eigvals(a_o).real.max() - 1.0))
    return ShareParts(model.theta, model.lambda_v, a_o, emb[:M, M:], a_e, s, alpha_e, alpha_bar)


def exclusive_h(model: TcvdbpModel) -> np.ndarray:
    """``h^e = lambda_v G_ex^{-1} k`` with ``k_l = (1-theta) sum_k m_lk``."""
    p = share_parts(model)
    g_ex = model.lambda_v * (p.a_e - np.eye(model.exclusive))
    k = (1.0 - model.theta) * p.s[model.mixed :]
    try:
        return model.lambda_v * np.linalg.solve(g_ex, k)
    except np.linalg.LinAlgError as exc:
        raise SingularityError("exclusive generator block is singular") from exc


def exclusive_shares_curve(model: TcvdbpModel, l: int) -> ExpCurve:
    """Shares from one particle of exclusive type ``l`` (0-based within the class)."""
    if not 0 <= l < model.exclusive:
        raise ArgumentError(f"exclusive type {l} outside 0..{model.exclusive - 1}")
    p = share_parts(model)
    if abs(p.alpha_e) <= EPS_DISTINCT:
        raise DegenerateSpectrumError("alpha_e is zero")
    h = exclusive_h(model)[l]
    return ExpCurve(((0.0, -h), (p.alpha_e, h)), f"shares from exclusive type {l + 1}")


@dataclass(frozen=True, eq=False)
class ShareCoeffs:
    g: np.ndarray
    h: np.ndarray
    o: np.ndarray
    alpha_bar: float
    alpha_e: float
    h_e: np.ndarray
    subcritical: bool
    warnings: tuple[str, ...] = ()


def mixed_shares_coeffs(model: TcvdbpModel, eps: float = EPS_DISTINCT) -> ShareCoeffs:
    p = share_parts(model)
    lv, th = p.lambda_v, p.theta
    M = model.mixed
    if not p.alpha_e > eps:
        raise ArgumentError(f"exclusive class is not supercritical (alpha_e = {p.alpha_e!r})")
    h_e = exclusive_h(model)
    notes = []
    eig = lv * (np.linalg.eigvals(p.a_o).real - 1.0)
    if np.count_nonzero(eig > 0) > 1:
        msg = f"{np.count_nonzero(eig > 0)} eigenvalues of the mixed block exceed 0; using the largest"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    s = p.s[:M]
    ab, ae = p.alpha_bar, p.alpha_e
    if ab < -eps:
        h = lv * (1.0 - th) * s / ae
        return ShareCoeffs(-h, h, np.zeros(M), ab, ae, h_e, True, tuple(notes))
    if abs(ab) <= eps:
        raise DegenerateSpectrumError("alpha_bar is zero")
    if abs(ab - ae) <= eps:
        raise DegenerateSpectrumError(f"alpha_bar and alpha_e coincide ({ab!r})")
    xh = p.a_x @ h_e
    aos = p.a_o @ s
    c = 1.0 - th
    o = lv / (ab * (ab - ae)) * (ae * xh + c * (lv * aos - (lv + ae) * s))
    g = -lv * c * s / ae + lv * xh / ab - c * lv * (lv + ae) * s / (ab * ae) + c * lv * lv * aos / (ab * ae)
    h = (lv * c * s - ab * o) / ae
    return ShareCoeffs(g, h, o, ab, ae, h_e, False, tuple(notes))


def mixed_shares_curve(model: TcvdbpModel, l: int, coeffs: ShareCoeffs | None = None) -> ExpCurve:
    if not 0 <= l < model.mixed:
        raise ArgumentError(f"mixed type {l} outside 0..{model.mixed - 1}")
    c = coeffs or mixed_shares_coeffs(model)
    terms = [(0.0, c.g[l]), (c.alpha_e, c.h[l])]
    if not c.subcritical:
        terms.append((c.alpha_bar, c.o[l]))
    return ExpCurve(tuple(terms), f"shares from mixed type {l + 1}")


def shares_curve(model: TcvdbpModel, start: int) -> ExpCurve:
    """Closed-form share curve for a start type indexed over all types."""
    if start < model.mixed:
        return mixed_shares_curve(model, start)
    return exclusive_shares_curve(model, start - model.mixed)


def exact_shares(model: TcvdbpModel, start: int, t: float) -> float:
    """Expected shares by ``t`` from the augmented generator ``[[G, c], [0, 0]]``.

    The extra coordinate accumulates ``c = lambda_v (1-theta) S``, the
    share rate of each type, so no closed-form assumption is involved.
    """
    n = model.n_types
    if not 0 <= start < n:
        raise ArgumentError(f"start type {start} outside 0..{n - 1}")
    g = model.lambda_v * (model.embedded_means() - np.eye(n))
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = g
    aug[:n, n] = model.lambda_v * (1.0 - model.theta) * model.share_means().sum(axis=1)
    return float(matexp_reference(aug, t)[start, n])
