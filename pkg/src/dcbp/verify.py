"""Monte Carlo checks of the closed forms.

Each check runs an ensemble, takes per-grid-point means and standard
errors (``std(ddof=1) / sqrt(reps)``), and passes a point when
``|mean - predicted| <= 3 * stderr`` (plus a 1e-12 relative allowance so
that exactly-known values with zero spread compare equal).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .analytics import (
    exact_shares,
    expectation_curve,
    martingale_coeffs,
    minimal_fixed_point,
    mixed_shares_coeffs,
    shares_curve,
    vdcbp_expected_y,
    vdcbp_growth,
)
from .analytics.vector import cross_matrix
from .errors import ArgumentError, DegenerateEnsembleError
from .linalg import matexp_reference
from .model import Model, SdcbpModel, TcvdbpModel, VdcbpModel, blocks, generator_matrix, reachability
from .simulator import EXTINCT, Ensemble, SimConfig, ensemble

SIGMAS = 3.0
BIAS_FRACTION = 0.01
# the rerun of a single-point failure uses stream seed + SECONDARY_OFFSET
SECONDARY_OFFSET = 1_000_003
DEFAULT_SURVIVAL_CAP = 50


@dataclass(eq=False)
class McReport:
    quantity: str
    label: str
    grid: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    predicted: np.ndarray
    reps: int
    excluded: int
    seed: int
    notes: list[str] = field(default_factory=list)

    @property
    def verdicts(self) -> np.ndarray:
        tol = SIGMAS * self.stderr + 1e-12 * np.maximum(1.0, np.abs(self.predicted))
        return np.abs(self.mean - self.predicted) <= tol

    @property
    def passed(self) -> bool:
        return bool(np.all(self.verdicts))

    @property
    def biased(self) -> bool:
        return self.excluded > BIAS_FRACTION * self.reps

    @property
    def z(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.mean - self.predicted) / self.stderr

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "mean", "stderr", "predicted", "verdict", "reps", "excluded"])
        for t, m, s, p, v in zip(self.grid, self.mean, self.stderr, self.predicted, self.verdicts):
            w.writerow([repr(float(t)), repr(float(m)), repr(float(s)), repr(float(p)), "pass" if v else "fail", self.reps, self.excluded])
        return buf.getvalue()

    def summary(self) -> str:
        head = f"{self.quantity} [{self.label}] reps={self.reps} excluded={self.excluded} seed={self.seed}"
        if self.biased:
            head += " BIASED"
        lines = [head]
        for t, m, s, p, v in zip(self.grid, self.mean, self.stderr, self.predicted, self.verdicts):
            lines.append(f"  t={t:g}  mean={m:.6g}  se={s:.3g}  predicted={p:.6g}  {'pass' if v else 'FAIL'}")
        lines += [f"  note: {n}" for n in self.notes]
        return "\n".join(lines)


def _stats(samples: np.ndarray, keep: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = samples[keep]
    n = x.shape[0]
    mean = x.mean(axis=0)
    se = x.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full_like(mean, np.inf)
    return mean, se


def _keep(ens: Ensemble) -> np.ndarray:
    keep = ~ens.capped
    if not keep.any():
        raise DegenerateEnsembleError("every replication hit the event cap")
    return keep


def _run(model: Model, initial, grid, reps: int, seed: int, **cfg) -> tuple[Ensemble, np.ndarray]:
    if reps < 2:
        raise ArgumentError("need at least two replications")
    grid = tuple(float(t) for t in grid)
    horizon = cfg.pop("horizon", None) or max(grid)
    ens = ensemble(model, initial, SimConfig(horizon=horizon, seed=seed, record_grid=grid, **cfg), reps)
    return ens, _keep(ens)


def rerun_policy(run: Callable[[int], McReport], seed: int, first: McReport | None = None) -> McReport:
    """Run once (or take ``first``); if exactly one grid point fails, rerun on a secondary seed."""
    rep = first if first is not None else run(seed)
    fails = int(np.count_nonzero(~rep.verdicts))
    if fails == 1:
        t = float(rep.grid[~rep.verdicts][0])
        second = run(seed + SECONDARY_OFFSET)
        second.notes.append(f"rerun on seed {seed + SECONDARY_OFFSET} after a single-point failure at t={t:g} (z={rep.z[~rep.verdicts][0]:.2f})")
        return second
    return rep


# --------------------------------------------------------------------------
# Expected population
# --------------------------------------------------------------------------


def predicted_means(model: Model, initial: Sequence[int], grid: Sequence[float]) -> tuple[np.ndarray, str]:
    """``E[X(t)]`` on ``grid`` from the closed forms, with the route used."""
    x0 = np.asarray(initial, dtype=float)
    n = model.n_types
    out = np.zeros((len(grid), n))
    if isinstance(model, SdcbpModel):
        for k in np.nonzero(x0)[0]:
            for m in range(n):
                out[:, m] += x0[k] * expectation_curve(model, int(k), m)(np.asarray(grid))
        return out, "martingale/expectation coefficients"
    if isinstance(model, VdcbpModel):
        a11, _, a22 = blocks(model)
        nn = model.n
        for gi, t in enumerate(grid):
            out[gi, :nn] = x0[:nn] @ matexp_reference(a11, t)
            out[gi, nn:] = x0[nn:] @ matexp_reference(a22, t)
        for j in np.nonzero(x0[:nn])[0]:
            curves = vdcbp_expected_y(model, int(j))
            for l, c in enumerate(curves):
                out[:, nn + l] += x0[j] * c(np.asarray(grid))
        return out, "class-2 means from the spectral two-class expansion"
    g = generator_matrix(model)
    for gi, t in enumerate(grid):
        out[gi] = x0 @ matexp_reference(g, t)
    return out, "generator exponential"


def mc_expectation(model: Model, initial: Sequence[int], grid: Sequence[float], reps: int, seed: int) -> list[McReport]:
    ens, keep = _run(model, initial, grid, reps, seed)
    pred, route = predicted_means(model, initial, grid)
    out = []
    for m in range(model.n_types):
        mean, se = _stats(ens.snapshots[:, :, m], keep)
        out.append(
            McReport(
                f"E[X_{m + 1}(t)]", "expectation", np.array(grid, float), mean, se, pred[:, m],
                reps, int((~keep).sum()), seed, [f"prediction: {route}"],
            )
        )
    return out


# --------------------------------------------------------------------------
# Extinction
# --------------------------------------------------------------------------


def ancestors(model: Model, mask: Sequence[int]) -> list[int]:
    """``mask`` plus every type whose line can produce a ``mask`` type."""
    g = generator_matrix(model)
    off = g - np.diag(np.diag(g))
    reach = reachability(off > 0)
    mask = set(int(i) for i in mask)
    return sorted(i for i in range(model.n_types) if i in mask or any(reach[i, j] for j in mask))


def predicted_extinction(model: Model, initial: Sequence[int], mask: Sequence[int], tol: float = 1e-12) -> float:
    active = ancestors(model, mask)
    fp = minimal_fixed_point(model, active, tol)
    q = np.ones(model.n_types)
    q[active] = fp.q
    return float(np.prod(q ** np.asarray(initial, dtype=float)))


def mc_extinction(
    model: Model,
    initial: Sequence[int],
    horizon: float,
    reps: int,
    seed: int,
    mask: Sequence[int] | None = None,
    survival_cap: int = DEFAULT_SURVIVAL_CAP,
) -> McReport:
    """Fraction of runs in which every ``mask`` type is gone by ``horizon``.

    Only ``mask`` and its ancestor types are simulated; the rest cannot
    affect the event.  A run whose tracked population reaches
    ``survival_cap`` is scored as surviving, which biases the frequency
    upward by at most ``max_k q_k ** survival_cap``.
    """
    mask = list(range(model.n_types)) if mask is None else [int(i) for i in mask]
    active = ancestors(model, mask)
    init = [x if i in active else 0 for i, x in enumerate(initial)]
    ens, keep = _run(model, init, (), reps, seed, horizon=horizon, population_cap=survival_cap, track=tuple(active))
    extinct = np.array([s == EXTINCT for s in ens.terminated], dtype=float)
    mean, se = _stats(extinct[:, None], keep)
    pred = predicted_extinction(model, initial, mask)
    fp = minimal_fixed_point(model, active)
    bound = float(np.max(fp.q)) ** survival_cap if len(fp.q) else 0.0
    return McReport(
        "P(extinct)", f"mask types {[i + 1 for i in mask]}", np.array([horizon]), mean, se, np.array([pred]),
        reps, int((~keep).sum()), seed, [f"survival declared at tracked population {survival_cap}; bias bound {bound:.2e}"],
    )


# --------------------------------------------------------------------------
# Martingales
# --------------------------------------------------------------------------


def mc_martingale_drift(
    model: SdcbpModel | VdcbpModel,
    m: int | None,
    grid: Sequence[float],
    reps: int,
    seed: int,
    initial: Sequence[int] | None = None,
) -> McReport:
    """Ensemble mean of the martingale against its starting value.

    For a scalar model the martingale is ``sum_i a_i^m X_i(t) e^{-alpha_m t}``;
    for a two-class model it is ``e^{-alpha2 t} (Y xi2R + X C xi2R)``.
    """
    n = model.n_types
    if initial is None:
        initial = [1] + [0] * (n - 1)
    x0 = np.asarray(initial, dtype=float)
    ens, keep = _run(model, initial, grid, reps, seed)
    t = np.asarray(grid, dtype=float)
    if isinstance(model, SdcbpModel):
        if m is None:
            raise ArgumentError("target type m is required for a scalar model")
        mc = martingale_coeffs(model, m)
        w = np.zeros(n)
        w[: m + 1] = mc.a
        rate = mc.alpha_m
        label = f"type {m + 1} martingale"
    elif isinstance(model, VdcbpModel):
        g = vdcbp_growth(model)
        w = np.concatenate([cross_matrix(model, g) @ g.xi2R, g.xi2R])
        rate = g.alpha2
        label = "two-class martingale"
    else:
        raise ArgumentError("martingale check needs a scalar or two-class model")
    vals = (ens.snapshots @ w) * np.exp(-rate * t)[None, :]
    mean, se = _stats(vals, keep)
    pred = np.full(len(t), float(x0 @ w))
    return McReport("martingale", label, t, mean, se, pred, reps, int((~keep).sum()), seed)


# --------------------------------------------------------------------------
# Shares
# --------------------------------------------------------------------------


def mc_shares(model: TcvdbpModel, start: int, grid: Sequence[float], reps: int, seed: int) -> McReport:
    """Mean number of shares (new offspring of either class) from one ``start`` particle."""
    init = [0] * model.n_types
    init[start] = 1
    ens, keep = _run(model, init, grid, reps, seed)
    total = ens.shares.sum(axis=2)
    mean, se = _stats(total, keep)
    t = np.asarray(grid, dtype=float)
    pred = shares_curve(model, start)(t)
    exact = np.array([exact_shares(model, start, x) for x in t])
    notes = ["exact mean (augmented generator): " + ", ".join(f"{v:.6g}" for v in exact)]
    if start < model.mixed:
        c = mixed_shares_coeffs(model)
        label = "conjecture check" if not c.subcritical else "mixed subcritical"
        notes += list(c.warnings)
    else:
        label = "exclusive"
    return McReport("shares", label, t, mean, se, pred, reps, int((~keep).sum()), seed, notes)
