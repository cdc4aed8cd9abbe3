"""Random model generators and independent oracles shared by the tests."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from dcbp.model import OffspringLaw, SdcbpModel, TcvdbpModel, VdcbpModel

MODELS = Path(__file__).resolve().parents[1] / "models"


def gapped(rng: np.random.Generator, n: int, lo: float, hi: float, gap: float) -> np.ndarray:
    """``n`` uniform draws on ``[lo, hi]`` whose sorted gaps are all >= ``gap``."""
    while True:
        x = rng.uniform(lo, hi, n)
        if n < 2 or np.diff(np.sort(x)).min() >= gap:
            return x


def random_triangular(rng, n: int, gap: float = 0.1) -> np.ndarray:
    return np.diag(gapped(rng, n, -1.0, 1.0, gap)) + np.triu(rng.uniform(0.0, 1.0, (n, n)), 1)


def _marginal(rng, max_count: int = 2) -> dict[int, float]:
    support = sorted(rng.choice(np.arange(max_count + 1), size=2, replace=False))
    p = rng.uniform(0.2, 0.8)
    return {int(support[0]): 1.0 - p, int(support[1]): p}


def random_sdcbp(rng, n: int, gap: float = 0.05, coupling: float = 0.7) -> SdcbpModel:
    """Triangular model with small-support independent marginals and distinct diagonals."""
    while True:
        laws = []
        for i in range(n):
            marg = {i: _marginal(rng)}
            for j in range(i + 1, n):
                if rng.random() < coupling:
                    marg[j] = {0: 1.0 - (q := rng.uniform(0.1, 0.6)), 1: q}
            laws.append(OffspringLaw.product(n, marg))
        rates = rng.uniform(0.5, 1.5, n)
        model = SdcbpModel(rates, tuple(laws))
        d = rates * (np.array([law.mean()[i] for i, law in enumerate(laws)]) - 1.0)
        if n < 2 or np.diff(np.sort(d)).min() >= gap:
            return model


def random_law(rng, n: int, targets, max_count: int = 2, density: float = 1.0) -> OffspringLaw:
    marg = {}
    for j in targets:
        if rng.random() < density:
            marg[j] = _marginal(rng, max_count)
    if not marg:
        marg[targets[0]] = _marginal(rng, max_count)
    return OffspringLaw.product(n, marg)


def random_tcvdbp(rng, M: int, E: int, theta: float | None = None, lambda_v: float | None = None) -> TcvdbpModel:
    n = M + E
    theta = rng.uniform(0.1, 0.6) if theta is None else theta
    lambda_v = rng.uniform(0.5, 2.0) if lambda_v is None else lambda_v
    a_mx = rng.dirichlet(np.ones(M), size=M)
    a_ex = rng.dirichlet(np.ones(E), size=E)
    laws = [random_law(rng, n, list(range(n))) for _ in range(M)]
    laws += [random_law(rng, n, list(range(M, n))) for _ in range(E)]
    return TcvdbpModel.from_blocks(theta, lambda_v, a_mx, a_ex, laws)


def with_share_means(theta, lambda_v, a_mx, a_ex, m) -> TcvdbpModel:
    """Model whose share laws have exactly the mean matrix ``m`` (Bernoulli/two-point marginals)."""
    M, E = len(a_mx), len(a_ex)
    n = M + E
    laws = []
    for i in range(n):
        marg = {}
        for j in range(n):
            mu = float(m[i][j])
            if mu > 0:
                k = int(np.floor(mu))
                frac = mu - k
                marg[j] = {k: 1.0 - frac, k + 1: frac} if frac > 0 else {k: 1.0}
        laws.append(OffspringLaw.product(n, marg) if marg else OffspringLaw.deterministic([0] * n))
    return TcvdbpModel.from_blocks(theta, lambda_v, a_mx, a_ex, laws)


def brute_generator(model) -> np.ndarray:
    """Generator by direct summation over atoms, written without the package helpers."""
    n = model.n_types
    g = np.zeros((n, n))
    for i in range(n):
        law = model.laws[i]
        for a in range(len(law.probs)):
            for j in range(n):
                g[i, j] += law.probs[a] * law.counts[a][j]
    if isinstance(model, TcvdbpModel):
        th = model.theta
        g = model.lambda_v * (th * model.type_change + (1 - th) * g - np.eye(n))
    else:
        g = np.array(model.rates)[:, None] * (g - np.eye(n))
    return g


def share_residuals(model: TcvdbpModel, c) -> tuple[float, float, float]:
    """Max-abs residuals of the constant, ``e^{alpha_e t}`` and ``e^{alpha_bar t}``
    balance equations obtained by substituting ``g + h e^{alpha_e t} + o e^{alpha_bar t}``
    (and ``-h^e + h^e e^{alpha_e t}`` for exclusive types) into the first-transition
    renewal equation."""
    M, n = model.mixed, model.n_types
    th, lv = model.theta, model.lambda_v
    a = model.type_change
    m = np.array([law.mean() for law in model.share_laws])
    g_all = np.concatenate([c.g, -c.h_e])
    h_all = np.concatenate([c.h, c.h_e])
    o_all = np.concatenate([c.o, np.zeros(n - M)])
    r20 = r21 = r22 = 0.0
    for l in range(M):
        rhs_g = sum(th * a[l, k] * g_all[k] + (1 - th) * m[l, k] * (1 + g_all[k]) for k in range(n))
        rhs_h = lv / (lv + c.alpha_e) * sum((th * a[l, k] + (1 - th) * m[l, k]) * h_all[k] for k in range(n))
        rhs_o = lv / (lv + c.alpha_bar) * sum((th * a[l, k] + (1 - th) * m[l, k]) * o_all[k] for k in range(n))
        r20 = max(r20, abs(c.g[l] - rhs_g))
        r21 = max(r21, abs(c.h[l] - rhs_h))
        r22 = max(r22, abs(c.o[l] - rhs_o))
    return r20, r21, r22

