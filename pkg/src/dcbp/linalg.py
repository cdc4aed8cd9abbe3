"""Dense matrix kernels: matrix exponentials, Perron data, M-matrix inverses.

Everything here is a pure function on small dense float arrays.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    ArgumentError,
    ConvergenceError,
    DegenerateSpectrumError,
    NotMMatrixError,
    NotPositiveRegularError,
    SingularityError,
)
from .model import is_irreducible, reachability

log = logging.getLogger(__name__)

EPS_DISTINCT = 1e-8


@dataclass(frozen=True, eq=False)
class TriangularSpectrum:
    """Upper-triangular generator split into its diagonal and strict upper part."""

    diag: np.ndarray
    offdiag: np.ndarray

    @classmethod
    def from_matrix(cls, b: np.ndarray) -> "TriangularSpectrum":
        b = np.asarray(b, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ArgumentError(f"expected a square matrix, got shape {b.shape}")
        if np.any(np.tril(b, -1) != 0):
            raise ArgumentError("matrix is not upper triangular")
        return cls(np.diag(b).copy(), np.triu(b, 1))

    @property
    def n(self) -> int:
        return len(self.diag)

    def matrix(self) -> np.ndarray:
        return np.diag(self.diag) + self.offdiag


@dataclass(frozen=True, eq=False)
class PerronData:
    root: float
    left: np.ndarray
    right: np.ndarray
    iterations: int = 0


def _check_square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ArgumentError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ArgumentError("matrix has non-finite entries")
    return a


def coupled_pairs(b: np.ndarray) -> list[tuple[int, int]]:
    """Pairs ``(i, j)``, ``i < j``, joined by a path of nonzero upper entries.

    Only these pairs produce ``(alpha_i - alpha_j)`` denominators in the
    closed forms; uncoupled types may share a diagonal value freely.
    """
    off = np.triu(np.asarray(b) != 0, 1)
    reach = reachability(off)
    return [(int(i), int(j)) for i, j in zip(*np.nonzero(reach))]


def check_distinct(b: np.ndarray, eps: float = EPS_DISTINCT) -> None:
    d = np.diag(b)
    for i, j in coupled_pairs(b):
        if abs(d[i] - d[j]) <= eps:
            raise DegenerateSpectrumError(
                f"diagonal entries {i} and {j} coincide ({d[i]!r} vs {d[j]!r}) on a coupled path"
            )


def exp_divided_difference(alphas: Sequence[float], delta: float) -> float:
    """``sum_p exp(alpha_p delta) / prod_{l != p} (alpha_p - alpha_l)``."""
    total = 0.0
    for p, ap in enumerate(alphas):
        den = 1.0
        for l, al in enumerate(alphas):
            if l != p:
                den *= ap - al
        total += math.exp(ap * delta) / den
    return total


def triangular_matexp_closed(b, delta: float, eps: float = EPS_DISTINCT) -> np.ndarray:
    """Closed-form ``exp(B delta)`` for upper-triangular ``B``.

    Entry ``(j, i)`` sums, over every increasing chain ``j = J_0 < ... <
    J_k = i``, the product of the chain's off-diagonal entries times the
    divided difference of ``x -> exp(x delta)`` at the chain's diagonal
    values.
    """
    if not isinstance(b, TriangularSpectrum):
        b = TriangularSpectrum.from_matrix(b)
    mat = b.matrix()
    check_distinct(mat, eps)
    n = b.n
    alpha = b.diag
    out = np.diag(np.exp(alpha * delta))
    for j in range(n):
        for i in range(j + 1, n):
            total = 0.0
            inner = range(j + 1, i)
            for k in range(len(inner) + 1):
                for mid in itertools.combinations(inner, k):
                    path = (j, *mid, i)
                    w = 1.0
                    for u, v in zip(path, path[1:]):
                        w *= mat[u, v]
                        if w == 0.0:
                            break
                    if w == 0.0:
                        continue
                    total += w * exp_divided_difference([alpha[x] for x in path], delta)
            out[j, i] = total
    return out


def matexp_reference(a: np.ndarray, delta: float = 1.0) -> np.ndarray:
    """``exp(A delta)`` by scaling and squaring with a truncated Taylor series."""
    a = _check_square(a) * float(delta)
    n = a.shape[0]
    norm = np.abs(a).sum(axis=1).max() if n else 0.0
    squarings = 0
    if norm > 0.5:
        squarings = int(math.ceil(math.log2(norm / 0.5)))
    a = a / (2.0**squarings)
    out = np.eye(n)
    term = np.eye(n)
    for k in range(1, 100):
        term = term @ a / k
        out = out + term
        if np.abs(term).max() < 1e-18:
            break
    for _ in range(squarings):
        out = out @ out
    return out


def triangular_matexp(b: np.ndarray, delta: float, eps: float = EPS_DISTINCT) -> np.ndarray:
    """Closed form when the spectrum allows it, otherwise the reference route."""
    try:
        return triangular_matexp_closed(b, delta, eps)
    except DegenerateSpectrumError as exc:
        log.warning("falling back to matexp_reference: %s", exc)
        return matexp_reference(b, delta)


def _metzler(a: np.ndarray) -> bool:
    off = a - np.diag(np.diag(a))
    return bool(np.all(off >= 0))


def _power(c: np.ndarray, tol: float, max_iter: int) -> tuple[float, np.ndarray, int]:
    n = c.shape[0]
    v = np.full(n, 1.0 / math.sqrt(n))
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = c @ v
        lam_new = float(np.linalg.norm(w))
        if lam_new == 0.0:
            raise ConvergenceError("power iteration collapsed to zero", last=v, residual=float("inf"), iterations=it)
        w /= lam_new
        change = float(np.abs(w - v).max())
        if abs(lam_new - lam) < tol and change < tol:
            return lam_new, w, it
        v, lam = w, lam_new
    resid = float(np.abs(c @ v - lam * v).max())
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} steps", last=v, residual=resid, iterations=max_iter
    )


def perron(a: np.ndarray, tol: float = 1e-12, max_iter: int = 100_000) -> PerronData:
    """Dominant eigenvalue and positive eigenvectors of an irreducible Metzler matrix.

    Runs power iteration on ``A + sI`` with ``s = max|diag| + 1``, which is
    nonnegative with a positive diagonal, hence primitive.  ``right`` has
    unit 2-norm; ``left`` is scaled so that ``right @ left == 1``.
    """
    a = _check_square(a)
    if not _metzler(a):
        raise ArgumentError("perron needs nonnegative off-diagonal entries")
    if not is_irreducible(a):
        raise NotPositiveRegularError("matrix is reducible")
    n = a.shape[0]
    if n == 1:
        return PerronData(float(a[0, 0]), np.ones(1), np.ones(1))
    shift = float(np.abs(np.diag(a)).max()) + 1.0
    c = a + shift * np.eye(n)
    rho_r, right, it_r = _power(c, tol, max_iter)
    rho_l, left, it_l = _power(c.T, tol, max_iter)
    right = right / np.linalg.norm(right)
    left = left / float(right @ left)
    root = 0.5 * (rho_r + rho_l) - shift
    return PerronData(root, left, right, max(it_r, it_l))


def dominant_eigenvalue(a: np.ndarray) -> float:
    """Largest real part in the spectrum of ``a``."""
    a = _check_square(a)
    if _metzler(a) and is_irreducible(a):
        return perron(a).root
    return float(np.linalg.eigvals(a).real.max())


def resolvent(alpha: float, a: np.ndarray, eps: float = EPS_DISTINCT) -> np.ndarray:
    """``(alpha I - A)^{-1}`` by direct solve, with no sign requirements."""
    a = _check_square(a)
    n = a.shape[0]
    eig = np.linalg.eigvals(a)
    if np.any(np.abs(eig - alpha) <= eps * max(1.0, abs(alpha))):
        raise SingularityError(f"alpha = {alpha!r} is an eigenvalue of the block")
    try:
        return np.linalg.solve(alpha * np.eye(n) - a, np.eye(n))
    except np.linalg.LinAlgError as exc:
        raise SingularityError(str(exc)) from exc


def m_matrix_inverse(alpha2: float, a11: np.ndarray, eps: float = EPS_DISTINCT) -> np.ndarray:
    """``(alpha2 I - A11)^{-1}``, required to be entrywise nonnegative."""
    a11 = _check_square(a11)
    dom = dominant_eigenvalue(a11)
    if abs(alpha2 - dom) <= eps * max(1.0, abs(dom)):
        raise SingularityError(f"alpha2 = {alpha2!r} equals the dominant eigenvalue {dom!r}")
    if alpha2 < dom:
        raise NotMMatrixError(f"alpha2 = {alpha2!r} is below the dominant eigenvalue {dom!r}")
    inv = resolvent(alpha2, a11, eps)
    if inv.min() < -1e-12:
        raise NotMMatrixError(f"inverse has a negative entry {inv.min()!r}")
    return inv


def partial_fraction_residual(alphas: Sequence[float], eps: float = EPS_DISTINCT) -> float:
    """``|sum_j 1 / prod_{l != j} (alpha_j - alpha_l)|`` in floating point.

    The exact value is 0 for two or more distinct points.
    """
    a = [float(x) for x in alphas]
    if len(a) < 2:
        raise ArgumentError("need at least two values")
    s = sorted(a)
    for x, y in zip(s, s[1:]):
        if y - x <= eps:
            raise ArgumentError(f"values {x!r} and {y!r} are not distinct")
    terms = []
    for j, aj in enumerate(a):
        den = 1.0
        for l, al in enumerate(a):
            if l != j:
                den *= aj - al
        terms.append(1.0 / den)
    return abs(math.fsum(terms))
