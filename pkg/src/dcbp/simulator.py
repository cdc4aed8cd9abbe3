"""Exact event-driven simulation of the three process variants.

Next event: one exponential at the total rate ``sum_i pop_i * rate_i``,
then a categorical pick of the acting type.  By memorylessness this is the
same law as racing one clock per particle.

Randomness: replication ``r`` of seed ``s`` draws from
``PCG64(SeedSequence(s, spawn_key=(r,)))``, so a replication's path
depends only on ``(s, r)`` and ensembles can be split or reordered freely.
Uniforms are pulled in blocks of ``_BLOCK``.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ArgumentError
from .model import Model, TcvdbpModel, VdcbpModel

SHARE = "share"
TYPE_CHANGE = "type-change"
DEATH = "death"  # a shift that leaves the tracked population

EXTINCT = "extinct"
HORIZON = "horizon"
EVENT_CAP = "event-cap"
POP_CAP = "population-cap"

_BLOCK = 512


@dataclass(frozen=True)
class SimConfig:
    horizon: float
    max_events: int = 10_000_000
    seed: int = 0
    record_grid: tuple[float, ...] = ()
    replication: int = 0
    # stop once the population reaches this size (None: never)
    population_cap: int | None = None
    # simulate only these types; offspring of other types are dropped
    track: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "record_grid", tuple(float(t) for t in self.record_grid))
        if not self.horizon > 0:
            raise ArgumentError(f"horizon must be positive, got {self.horizon!r}")
        if self.max_events < 1:
            raise ArgumentError("max_events must be at least 1")
        g = self.record_grid
        if any(b < a for a, b in zip(g, g[1:])):
            raise ArgumentError("record grid must be sorted")
        if g and (g[0] < 0 or g[-1] > self.horizon):
            raise ArgumentError("record grid must lie in [0, horizon]")


def rng_for(seed: int, replication: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(replication),))))


@dataclass(eq=False)
class EventLog:
    initial: np.ndarray
    grid: np.ndarray
    snapshots: np.ndarray  # (grid, types), NaN past an early stop
    shares: np.ndarray  # (grid, classes) cumulative new offspring
    progeny: np.ndarray  # (grid,) offspring plus type changes
    terminated: str
    n_events: int
    n_type_changes: int
    final_time: float  # time of the last event
    final: np.ndarray
    class_of: tuple[int, ...]
    events: list | None = None  # (time, parent, kind, offspring counts)

    @property
    def capped(self) -> bool:
        return self.terminated == EVENT_CAP

    @property
    def complete(self) -> bool:
        """True if every snapshot holds a real state."""
        return self.terminated in (EXTINCT, HORIZON)


class _Compiled:
    """Flat per-type lookup tables for the event loop."""

    def __init__(self, model: Model, track: Sequence[int] | None = None) -> None:
        n = model.n_types
        self.n = n
        keep_type = [True] * n if track is None else [i in set(track) for i in range(n)]
        self.rates = [float(r) for r in model.rates]
        if isinstance(model, TcvdbpModel):
            self.theta = model.theta
            cls = [0] * model.mixed + [1] * model.exclusive
            self.shift_cum, self.shift_to = [], []
            for i in range(n):
                row = model.type_change[i]
                to = [int(k) for k in np.nonzero(row > 0)[0] if keep_type[k]]
                self.shift_to.append(to)
                self.shift_cum.append(list(np.cumsum(row[to])))
        elif isinstance(model, VdcbpModel):
            self.theta = 0.0
            cls = [0] * model.n + [1] * model.m
        else:
            self.theta = 0.0
            cls = list(range(n))
        self.class_of = cls
        self.n_classes = max(cls) + 1
        self.cum, self.deltas, self.atoms = [], [], []
        for law in model.laws:
            keep = np.nonzero(law.probs > 0)[0]
            self.cum.append(list(np.cumsum(law.probs[keep])))
            counts = law.counts * np.array(keep_type, dtype=np.int64)
            self.deltas.append([[(int(j), int(c)) for j, c in enumerate(counts[a]) if c] for a in keep])
            self.atoms.append([tuple(int(c) for c in counts[a]) for a in keep])


def _run(c: _Compiled, initial: Sequence[int], cfg: SimConfig, rng: np.random.Generator, record: bool) -> EventLog:
    n = c.n
    pop = [int(x) for x in initial]
    rates = c.rates
    theta = c.theta
    class_of = c.class_of
    grid = cfg.record_grid
    G = len(grid)
    snaps = np.full((G, n), np.nan)
    shares_out = np.full((G, c.n_classes), np.nan)
    prog_out = np.full(G, np.nan)
    shares = [0] * c.n_classes
    progeny = 0
    type_changes = 0
    events = [] if record else None
    cap = cfg.population_cap
    horizon = cfg.horizon
    max_events = cfg.max_events

    buf: list = []
    bi = _BLOCK

    t = 0.0
    gi = 0
    n_events = 0
    total = sum(pop)
    status = HORIZON
    while True:
        rate = 0.0
        for i in range(n):
            if pop[i]:
                rate += pop[i] * rates[i]
        if rate == 0.0:
            status = EXTINCT
            break
        if bi + 3 > _BLOCK:
            buf = rng.random(_BLOCK).tolist()
            bi = 0
        t_next = t - math.log1p(-buf[bi]) / rate
        u_type = buf[bi + 1] * rate
        u_act = buf[bi + 2]
        bi += 3
        while gi < G and grid[gi] < t_next:
            snaps[gi] = pop
            shares_out[gi] = shares
            prog_out[gi] = progeny
            gi += 1
        if t_next > horizon:
            break
        if n_events >= max_events:
            status = EVENT_CAP
            break
        acc = 0.0
        i = n - 1
        for k in range(n):
            if pop[k]:
                acc += pop[k] * rates[k]
                if u_type < acc:
                    i = k
                    break
        while pop[i] == 0:  # rounding pushed u_type past the last bucket
            i -= 1
        t = t_next
        n_events += 1
        pop[i] -= 1
        total -= 1
        if theta > 0.0 and u_act < theta:
            cum = c.shift_cum[i]
            u = u_act / theta
            k = bisect.bisect_right(cum, u)
            if k < len(cum):
                j = c.shift_to[i][k]
                pop[j] += 1
                total += 1
                progeny += 1
                type_changes += 1
                if record:
                    off = [0] * n
                    off[j] = 1
                    events.append((t, i, TYPE_CHANGE, tuple(off)))
            elif record:
                events.append((t, i, DEATH, (0,) * n))
        else:
            if theta > 0.0:
                u = (u_act - theta) / (1.0 - theta)
            else:
                u = u_act
            cum = c.cum[i]
            a = bisect.bisect_right(cum, u * cum[-1])
            if a >= len(cum):
                a = len(cum) - 1
            for j, cnt in c.deltas[i][a]:
                pop[j] += cnt
                total += cnt
                shares[class_of[j]] += cnt
                progeny += cnt
            if record:
                events.append((t, i, SHARE, c.atoms[i][a]))
        if cap is not None and total >= cap:
            status = POP_CAP
            break
    if status in (EXTINCT, HORIZON):
        while gi < G:
            snaps[gi] = pop
            shares_out[gi] = shares
            prog_out[gi] = progeny
            gi += 1
    return EventLog(
        initial=np.array(initial, dtype=np.int64),
        grid=np.array(grid, dtype=float),
        snapshots=snaps,
        shares=shares_out,
        progeny=prog_out,
        terminated=status,
        n_events=n_events,
        n_type_changes=type_changes,
        final_time=t,
        final=np.array(pop, dtype=np.int64),
        class_of=tuple(class_of),
        events=events,
    )


def _check_initial(model: Model, initial: Sequence[int]) -> list[int]:
    init = np.asarray(initial)
    if init.shape != (model.n_types,):
        raise ArgumentError(f"initial state needs {model.n_types} entries, got shape {init.shape}")
    if np.any(init < 0) or np.any(init != np.round(init)):
        raise ArgumentError("initial state must be nonnegative integers")
    return [int(x) for x in init]


def simulate(model: Model, initial: Sequence[int], config: SimConfig, record_events: bool = True) -> EventLog:
    """One trajectory, driven by stream ``(config.seed, config.replication)``."""
    init = _check_initial(model, initial)
    return _run(_Compiled(model, config.track), init, config, rng_for(config.seed, config.replication), record_events)


@dataclass(eq=False)
class Ensemble:
    snapshots: np.ndarray  # (reps, grid, types)
    shares: np.ndarray  # (reps, grid, classes)
    progeny: np.ndarray  # (reps, grid)
    terminated: list[str]
    n_events: np.ndarray
    n_type_changes: np.ndarray

    @property
    def capped(self) -> np.ndarray:
        return np.array([s == EVENT_CAP for s in self.terminated])


def ensemble(
    model: Model,
    initial: Sequence[int],
    config: SimConfig,
    reps: int,
    first_replication: int = 0,
) -> Ensemble:
    """``reps`` independent trajectories, replication ``r`` on stream ``(seed, r)``."""
    init = _check_initial(model, initial)
    comp = _Compiled(model, config.track)
    G = len(config.record_grid)
    snaps = np.empty((reps, G, comp.n))
    shares = np.empty((reps, G, comp.n_classes))
    prog = np.empty((reps, G))
    term = []
    nev = np.empty(reps, dtype=np.int64)
    ntc = np.empty(reps, dtype=np.int64)
    for k in range(reps):
        r = first_replication + k
        log = _run(comp, init, config, rng_for(config.seed, r), False)
        snaps[k] = log.snapshots
        shares[k] = log.shares
        prog[k] = log.progeny
        term.append(log.terminated)
        nev[k] = log.n_events
        ntc[k] = log.n_type_changes
    return Ensemble(snaps, shares, prog, term, nev, ntc)


# --------------------------------------------------------------------------
# Trajectory functionals
# --------------------------------------------------------------------------


def replay(log: EventLog, type_changes_as_offspring: bool = False):
    """Rebuild snapshots and counters from the event list alone.

    Returns ``(snapshots, shares, progeny)`` on ``log.grid``.  With
    ``type_changes_as_offspring`` the new-type particle of each type change
    is counted as a share as well.
    """
    if log.events is None:
        raise ArgumentError("log was recorded without events")
    n = log.snapshots.shape[1]
    n_classes = log.shares.shape[1]
    class_of = log.class_of
    pop = log.initial.astype(np.int64).copy()
    shares = np.zeros(n_classes, dtype=np.int64)
    progeny = 0
    G = len(log.grid)
    snaps = np.full((G, n), np.nan)
    sh = np.full((G, n_classes), np.nan)
    pr = np.full(G, np.nan)
    gi = 0
    for time, parent, kind, off in log.events:
        while gi < G and log.grid[gi] < time:
            snaps[gi], sh[gi], pr[gi] = pop, shares, progeny
            gi += 1
        off = np.asarray(off, dtype=np.int64)
        pop += off
        pop[parent] -= 1
        if kind == SHARE or (kind == TYPE_CHANGE and type_changes_as_offspring):
            for j in np.nonzero(off)[0]:
                shares[class_of[j]] += off[j]
        if kind != DEATH:
            progeny += int(off.sum())
    if log.complete:
        while gi < G:
            snaps[gi], sh[gi], pr[gi] = pop, shares, progeny
            gi += 1
    return snaps, sh, pr


def replay_matches(log: EventLog) -> bool:
    snaps, sh, pr = replay(log)
    same = lambda a, b: bool(np.array_equal(a, b, equal_nan=True))
    return same(snaps, log.snapshots) and same(sh, log.shares) and same(pr, log.progeny)


def martingale_series(log: EventLog, a, alpha_m: float) -> list[tuple[float, float]]:
    """``sum_i a_i X_i(t) exp(-alpha_m t)`` on the record grid.

    ``a`` covers types ``0..m``; a ``MartingaleCoeffs`` is accepted too.
    """
    a = np.asarray(getattr(a, "a", a), dtype=float)
    n = log.snapshots.shape[1]
    if a.ndim != 1 or len(a) > n:
        raise ArgumentError(f"coefficient vector of length {len(a)} for a {n}-type log")
    x = log.snapshots[:, : len(a)]
    vals = (x @ a) * np.exp(-alpha_m * log.grid)
    return [(float(t), float(v)) for t, v in zip(log.grid, vals)]


def estimate_w(log: EventLog, target: int, alpha_m: float, horizon: float) -> float:
    """``X_target(horizon) exp(-alpha_m horizon)``, a finite-horizon stand-in for the limit."""
    if not log.complete:
        raise ArgumentError(f"log stopped early ({log.terminated}); no state at the horizon")
    return float(log.final[target] * math.exp(-alpha_m * horizon))
