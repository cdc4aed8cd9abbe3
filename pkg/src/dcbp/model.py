"""Process variants, offspring laws, PGFs and generator matrices.

Three variants are supported:

* ``SdcbpModel``  -- scalar decomposable process, one type per irreducible
  class, offspring only of the same or higher type index.
* ``VdcbpModel``  -- two multi-type classes; class 1 may produce class 2,
  never the reverse.
* ``TcvdbpModel`` -- type-changing variant: at each transition the particle
  either changes type (probability ``theta``) or shares, i.e. dies and
  leaves offspring drawn from its share law.

All type indices in the Python API are 0-based.  Models are frozen and hold
read-only arrays, so they can be shared between threads and pickled into
worker processes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import ArgumentError, ModelError

PROB_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Violation:
    invariant: str
    where: str
    detail: str = ""

    def __str__(self) -> str:
        tail = f": {self.detail}" if self.detail else ""
        return f"[{self.invariant}] {self.where}{tail}"


@dataclass(frozen=True, eq=False)
class OffspringLaw:
    """Finite joint PMF over offspring-count vectors.

    ``counts[a, j]`` is the number of type-``j`` offspring in atom ``a`` and
    ``probs[a]`` its probability.
    """

    counts: np.ndarray
    probs: np.ndarray

    def __post_init__(self) -> None:
        counts = np.array(self.counts, dtype=np.int64, ndmin=2, copy=True)
        probs = np.array(self.probs, dtype=float, ndmin=1, copy=True)
        if counts.shape[0] != probs.shape[0]:
            raise ArgumentError(
                f"{counts.shape[0]} count vectors but {probs.shape[0]} probabilities"
            )
        object.__setattr__(self, "counts", _readonly(counts))
        object.__setattr__(self, "probs", _readonly(probs))

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[Sequence[int], float]]) -> "OffspringLaw":
        atoms = list(atoms)
        if not atoms:
            raise ArgumentError("an offspring law needs at least one atom")
        counts = [list(c) for c, _ in atoms]
        if len({len(c) for c in counts}) != 1:
            raise ArgumentError("atoms have count vectors of different lengths")
        for c in counts:
            for x in c:
                if x != int(x):
                    raise ArgumentError(f"non-integer offspring count {x!r}")
        return cls(np.array(counts, dtype=np.int64), np.array([p for _, p in atoms], dtype=float))

    @classmethod
    def product(cls, n_types: int, marginals: Mapping[int, Mapping[int, float]]) -> "OffspringLaw":
        """Law with independent per-type offspring counts.

        ``marginals[j]`` maps a count of type-``j`` offspring to its
        probability; types absent from ``marginals`` always get zero.
        """
        for j in marginals:
            if not 0 <= j < n_types:
                raise ArgumentError(f"marginal for type {j} outside 0..{n_types - 1}")
        keys = sorted(marginals)
        supports = [sorted(marginals[j].items()) for j in keys]
        atoms = []
        for combo in itertools.product(*supports):
            c = [0] * n_types
            p = 1.0
            for j, (k, pk) in zip(keys, combo):
                c[j] = int(k)
                p *= pk
            if p > 0.0:
                atoms.append((c, p))
        return cls.from_atoms(atoms)

    @classmethod
    def deterministic(cls, counts: Sequence[int]) -> "OffspringLaw":
        return cls.from_atoms([(counts, 1.0)])

    @property
    def n_types(self) -> int:
        return self.counts.shape[1]

    def mean(self) -> np.ndarray:
        return self.probs @ self.counts

    def pgf(self, s: Sequence[float]) -> float:
        s = np.asarray(s, dtype=float)
        if s.shape != (self.n_types,):
            raise ArgumentError(f"PGF argument has shape {s.shape}, expected ({self.n_types},)")
        return float(self.probs @ np.prod(s[None, :] ** self.counts, axis=1))

    def violations(self, where: str, n_types: int | None = None) -> list[Violation]:
        out = []
        total = float(self.probs.sum())
        if abs(total - 1.0) > PROB_TOL:
            out.append(Violation("probabilities sum to 1", where, f"sum = {total!r}"))
        if np.any(self.probs < 0) or np.any(self.probs > 1):
            out.append(Violation("probabilities in [0,1]", where))
        if np.any(self.counts < 0):
            out.append(Violation("nonnegative counts", where))
        if n_types is not None and self.n_types != n_types:
            out.append(
                Violation("count vector length", where, f"{self.n_types} entries, model has {n_types} types")
            )
        return out


def _rates_array(rates: Sequence[float], n: int) -> np.ndarray:
    r = np.array(rates, dtype=float, ndmin=1, copy=True)
    if r.shape != (n,):
        raise ArgumentError(f"expected {n} rates, got shape {r.shape}")
    return _readonly(r)


def _mean_matrix(laws: Sequence[OffspringLaw]) -> np.ndarray:
    return np.vstack([law.mean() for law in laws])


def reachability(adj: np.ndarray) -> np.ndarray:
    """Boolean transitive closure of ``adj != 0`` (paths of length >= 1)."""
    reach = np.asarray(adj) != 0
    n = reach.shape[0]
    for k in range(n):
        reach = reach | (reach[:, [k]] & reach[[k], :])
    return reach


def is_irreducible(a: np.ndarray) -> bool:
    """True if the off-diagonal support of ``a`` is strongly connected."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if n == 1:
        return True
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    reach = reachability(off > 0)
    return bool(np.all(reach | np.eye(n, dtype=bool)))


@dataclass(frozen=True, eq=False)
class SdcbpModel:
    rates: np.ndarray
    laws: tuple[OffspringLaw, ...]

    def __post_init__(self) -> None:
        laws = tuple(self.laws)
        object.__setattr__(self, "laws", laws)
        object.__setattr__(self, "rates", _rates_array(self.rates, len(laws)))

    @property
    def n_types(self) -> int:
        return len(self.laws)

    @property
    def classes(self) -> list[list[int]]:
        return [[i] for i in range(self.n_types)]


@dataclass(frozen=True, eq=False)
class VdcbpModel:
    n: int
    m: int
    rates: np.ndarray
    laws: tuple[OffspringLaw, ...]

    def __post_init__(self) -> None:
        laws = tuple(self.laws)
        if len(laws) != self.n + self.m:
            raise ArgumentError(f"need {self.n + self.m} laws, got {len(laws)}")
        object.__setattr__(self, "laws", laws)
        object.__setattr__(self, "rates", _rates_array(self.rates, len(laws)))

    @property
    def n_types(self) -> int:
        return self.n + self.m

    @property
    def classes(self) -> list[list[int]]:
        return [list(range(self.n)), list(range(self.n, self.n + self.m))]


@dataclass(frozen=True, eq=False)
class TcvdbpModel:
    """Type-changing two-class process.

    ``type_change`` is the full ``(M+E) x (M+E)`` shift matrix; its
    mixed/exclusive diagonal blocks are the row-stochastic ``a_{l,k}``.
    With ``boundary_shifts`` set, shifts may also move a mixed particle into
    the exclusive class or out of the tracked population (the row deficit is
    the probability that a shift removes the particle).  Plain TC-VDBPs
    leave it off.
    """

    mixed: int
    exclusive: int
    theta: float
    lambda_v: float
    type_change: np.ndarray
    share_laws: tuple[OffspringLaw, ...]
    boundary_shifts: bool = False

    def __post_init__(self) -> None:
        k = self.mixed + self.exclusive
        laws = tuple(self.share_laws)
        if len(laws) != k:
            raise ArgumentError(f"need {k} share laws, got {len(laws)}")
        a = np.array(self.type_change, dtype=float, copy=True)
        if a.shape != (k, k):
            raise ArgumentError(f"type_change must be {k}x{k}, got {a.shape}")
        object.__setattr__(self, "share_laws", laws)
        object.__setattr__(self, "type_change", _readonly(a))
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "lambda_v", float(self.lambda_v))

    @classmethod
    def from_blocks(
        cls,
        theta: float,
        lambda_v: float,
        a_mixed: np.ndarray,
        a_exclusive: np.ndarray,
        share_laws: Sequence[OffspringLaw],
    ) -> "TcvdbpModel":
        a_mixed = np.atleast_2d(np.asarray(a_mixed, dtype=float))
        a_exclusive = np.atleast_2d(np.asarray(a_exclusive, dtype=float))
        M, E = a_mixed.shape[0], a_exclusive.shape[0]
        a = np.zeros((M + E, M + E))
        a[:M, :M] = a_mixed
        a[M:, M:] = a_exclusive
        return cls(M, E, theta, lambda_v, a, tuple(share_laws))

    @property
    def n_types(self) -> int:
        return self.mixed + self.exclusive

    @property
    def rates(self) -> np.ndarray:
        return np.full(self.n_types, self.lambda_v)

    @property
    def laws(self) -> tuple[OffspringLaw, ...]:
        return self.share_laws

    @property
    def classes(self) -> list[list[int]]:
        return [list(range(self.mixed)), list(range(self.mixed, self.n_types))]

    def share_means(self) -> np.ndarray:
        """Matrix of ``m_{l,k}``: mean type-k offspring of a type-l share."""
        return _mean_matrix(self.share_laws)

    def embedded_means(self) -> np.ndarray:
        """``theta * a + (1 - theta) * m``: mean successors per transition."""
        return self.theta * self.type_change + (1.0 - self.theta) * self.share_means()


Model = Union[SdcbpModel, VdcbpModel, TcvdbpModel]


@dataclass(frozen=True)
class SocialNetworkParams:
    """Two competing posts on timelines truncated at ``N`` levels."""

    eta1: float
    eta2: float
    delta_att: float
    theta: float
    lambda_v: float
    mean_friends: float
    read_probs: tuple[float, ...]
    level_probs: tuple[float, ...]
    p: float
    N: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "read_probs", tuple(float(x) for x in self.read_probs))
        object.__setattr__(self, "level_probs", tuple(float(x) for x in self.level_probs))

    def violations(self) -> list[Violation]:
        out = []
        if int(self.N) != self.N or self.N < 2:
            out.append(Violation("N >= 2", "social.N", f"N = {self.N!r}"))
        for name in ("eta1", "eta2", "delta_att", "theta", "p"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                out.append(Violation("probability in [0,1]", f"social.{name}", repr(v)))
        if not self.lambda_v > 0:
            out.append(Violation("positive rate", "social.lambda_v", repr(self.lambda_v)))
        if not self.mean_friends > 0:
            out.append(Violation("positive mean", "social.mean_friends", repr(self.mean_friends)))
        for name in ("read_probs", "level_probs"):
            vals = getattr(self, name)
            if len(vals) != self.N - 1:
                out.append(Violation("length N-1", f"social.{name}", f"{len(vals)} values for N = {self.N}"))
            for i, v in enumerate(vals):
                if not 0.0 <= v <= 1.0:
                    out.append(Violation("probability in [0,1]", f"social.{name}[{i}]", repr(v)))
        if sum(self.level_probs) > 1.0 + PROB_TOL:
            out.append(Violation("level probabilities sum <= 1", "social.level_probs", repr(sum(self.level_probs))))
        return out


# --------------------------------------------------------------------------
# PGF and generator
# --------------------------------------------------------------------------


def pgf_eval(model: Model, i: int, s: Sequence[float]) -> float:
    """Offspring PGF of a type-``i`` particle at ``s``.

    For a TC-VDBP this is the PGF of the successor vector of one transition,
    ``theta * sum_k a_{ik} s_k + (1 - theta) * h_i(s)`` (the constant term of
    a leaky shift row counts as removal).
    """
    n = model.n_types
    if not 0 <= i < n:
        raise ArgumentError(f"type index {i} outside 0..{n - 1}")
    s = np.asarray(s, dtype=float)
    if s.shape != (n,):
        raise ArgumentError(f"PGF argument has shape {s.shape}, expected ({n},)")
    if isinstance(model, TcvdbpModel):
        row = model.type_change[i]
        shift = float(row @ s) + (1.0 - float(row.sum()))
        return model.theta * shift + (1.0 - model.theta) * model.share_laws[i].pgf(s)
    return model.laws[i].pgf(s)


def generator_matrix(model: Model) -> np.ndarray:
    """Mean-flow generator: ``E[X(t)] = X(0) @ expm(G t)``."""
    n = model.n_types
    if isinstance(model, TcvdbpModel):
        return model.lambda_v * (model.embedded_means() - np.eye(n))
    means = _mean_matrix(model.laws)
    return model.rates[:, None] * (means - np.eye(n))


def blocks(model: Union[VdcbpModel, TcvdbpModel], g: np.ndarray | None = None):
    """Split a two-class generator into ``(A11, A12, A22)``."""
    if g is None:
        g = generator_matrix(model)
    k = model.n if isinstance(model, VdcbpModel) else model.mixed
    return g[:k, :k], g[:k, k:], g[k:, k:]


# --------------------------------------------------------------------------
# Validation
# --------------------------------------------------------------------------


def validate(model) -> list[Violation]:
    """Report every structural invariant the model breaks; never raises."""
    if isinstance(model, SocialNetworkParams):
        return model.violations()
    out: list[Violation] = []
    n = model.n_types
    rates = model.rates
    for i, r in enumerate(rates):
        if not (r > 0 and math.isfinite(r)):
            out.append(Violation("rates strictly positive", f"type {i}", f"rate = {r!r}"))
    for i, law in enumerate(model.laws):
        out.extend(law.violations(f"law of type {i}", n))
    if any(v.invariant == "count vector length" for v in out):
        return out

    if isinstance(model, SdcbpModel):
        for i, law in enumerate(model.laws):
            for a in range(law.counts.shape[0]):
                if law.probs[a] > 0 and np.any(law.counts[a, :i] > 0):
                    lower = [int(j) for j in np.nonzero(law.counts[a, :i])[0]]
                    out.append(
                        Violation("triangular support", f"law of type {i}, atom {a}", f"produces lower types {lower}")
                    )
    elif isinstance(model, VdcbpModel):
        for i in range(model.n, n):
            law = model.laws[i]
            mask = (law.probs > 0) & np.any(law.counts[:, : model.n] > 0, axis=1)
            for a in np.nonzero(mask)[0]:
                out.append(
                    Violation("class 2 never produces class 1", f"law of type {i}, atom {int(a)}")
                )
        means = _mean_matrix(model.laws)
        if not is_irreducible(means[: model.n, : model.n]):
            out.append(Violation("irreducible block", "A11"))
        if not is_irreducible(means[model.n :, model.n :]):
            out.append(Violation("irreducible block", "A22"))
    elif isinstance(model, TcvdbpModel):
        M = model.mixed
        if not 0.0 <= model.theta <= 1.0:
            out.append(Violation("theta in [0,1]", "theta", repr(model.theta)))
        if not model.lambda_v > 0:
            out.append(Violation("rates strictly positive", "lambda_v", repr(model.lambda_v)))
        a = model.type_change
        if np.any(a < 0):
            out.append(Violation("nonnegative type-change probabilities", "type_change"))
        if np.any(a[M:, :M] != 0):
            out.append(Violation("no cross-class type changes", "type_change exclusive->mixed"))
        if not model.boundary_shifts and np.any(a[:M, M:] != 0):
            out.append(Violation("no cross-class type changes", "type_change mixed->exclusive"))
        for i, rs in enumerate(a.sum(axis=1)):
            if model.boundary_shifts:
                if rs > 1.0 + PROB_TOL:
                    out.append(Violation("row-substochastic", f"type_change row {i}", f"sum = {rs!r}"))
            elif abs(rs - 1.0) > PROB_TOL:
                out.append(Violation("row-stochastic", f"type_change row {i}", f"sum = {rs!r}"))
        for i in range(M, n):
            law = model.share_laws[i]
            mask = (law.probs > 0) & np.any(law.counts[:, :M] > 0, axis=1)
            for at in np.nonzero(mask)[0]:
                out.append(Violation("exclusive never produces mixed", f"share law of type {i}, atom {int(at)}"))
    return out


def check(model) -> None:
    """Raise ``ModelError`` listing every violation, if there are any."""
    v = validate(model)
    if v:
        raise ModelError("; ".join(str(x) for x in v), v)


# --------------------------------------------------------------------------
# Canned models
# --------------------------------------------------------------------------


def model_a() -> SdcbpModel:
    """Two-type reference model with generator ``[[0.2, 0.5], [0, 0.5]]``."""
    law1 = OffspringLaw.product(2, {0: {0: 0.4, 2: 0.6}, 1: {0: 0.5, 1: 0.5}})
    law2 = OffspringLaw.product(2, {1: {0: 0.25, 2: 0.75}})
    return SdcbpModel(np.array([1.0, 1.0]), (law1, law2))


# --------------------------------------------------------------------------
# Social-network instantiation
# --------------------------------------------------------------------------


def _friend_count_pmf(mean: float) -> list[tuple[int, float]]:
    lo = math.floor(mean)
    frac = mean - lo
    if frac == 0.0:
        return [(lo, 1.0)]
    return [(lo, 1.0 - frac), (lo + 1, frac)]


def _multinomial_law(
    n_types: int,
    read_prob: float,
    mean_friends: float,
    outcomes: list[tuple[int | None, float]],
) -> OffspringLaw:
    """Share law: read w.p. ``read_prob``, then each friend independently
    lands in outcome slot ``j`` (a type index, or ``None`` for untracked).

    Friend counts take the two integers around ``mean_friends`` so the mean
    is exact and the support finite.
    """
    total = sum(p for _, p in outcomes)
    slots = [(t, p) for t, p in outcomes if p > 0.0]
    if total < 1.0 - PROB_TOL:
        slots.append((None, 1.0 - total))
    acc: dict[tuple[int, ...], float] = {}

    def add(counts: tuple[int, ...], p: float) -> None:
        if p > 0.0:
            acc[counts] = acc.get(counts, 0.0) + p

    add((0,) * n_types, 1.0 - read_prob)
    if read_prob > 0.0:
        for f, pf in _friend_count_pmf(mean_friends):
            for split in _compositions(f, len(slots)):
                coef = math.factorial(f)
                p = pf * read_prob
                c = [0] * n_types
                for (t, pt), k in zip(slots, split):
                    coef //= math.factorial(k)
                    p *= pt**k
                    if t is not None:
                        c[t] += k
                add(tuple(c), coef * p)
    return OffspringLaw.from_atoms(sorted(acc.items()))


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def build_social_network_model(params: SocialNetworkParams, target_post: int) -> TcvdbpModel:
    """Sub-process of the two-post timeline model tracking exclusive class ``target_post``.

    Type layout (0-based):

    * mixed type ``2(l-1) + (o-1)`` for level ``l = 1..N-1`` and top post
      ``o``: post ``o`` sits at level ``l``, the other post at ``l+1``;
    * exclusive type ``M + (l-1)`` for ``l = 1..N``: only ``target_post``,
      at level ``l``; ``M = 2(N-1)``.

    A share from a timeline at level ``l`` happens only if it is read
    (probability ``r_l``; level ``N`` is never read).  Each friend
    independently gets both posts with probability ``delta*eta1*eta2``
    (same order as the parent w.p. ``1-p``), only post ``i`` with
    probability ``eta_i*(1-delta*eta_{-i})`` when ``i`` is the upper post and
    ``delta*eta_i*(1-eta_{-i})`` when it is the lower one, and lands at level
    ``j`` w.p. ``rho_j``.  Friends that only get the other post belong to
    the sibling sub-process and are not tracked.  With the share
    probability folded in, the generator entries are ``lambda_v`` times
    ``z'_j r_l``, ``z_j r_l`` (mixed), ``c_{mx,i} r_l rho_j`` or
    ``c'_{mx,i} r_l rho_j`` (mixed to exclusive).

    A shift pushes everything one level down: mixed ``(l, o)`` moves to
    ``(l+1, o)``; at ``l = N-1`` the lower post falls off, leaving an
    exclusive timeline at level ``N`` (tracked only when ``o`` is the
    target); exclusive level ``N`` shifts out of the window.
    """
    v = params.violations()
    if v:
        raise ArgumentError("; ".join(str(x) for x in v))
    if target_post not in (1, 2):
        raise ArgumentError(f"target_post must be 1 or 2, got {target_post!r}")
    N = int(params.N)
    M, E = 2 * (N - 1), N
    K = M + E
    eta = {1: params.eta1, 2: params.eta2}
    i, other = target_post, 3 - target_post
    d = params.delta_att
    both = d * params.eta1 * params.eta2
    only_i_upper = eta[i] * (1.0 - d * eta[other])
    only_i_lower = d * eta[i] * (1.0 - eta[other])
    rho = params.level_probs
    read = list(params.read_probs) + [0.0]

    def mixed(level: int, top: int) -> int:
        return 2 * (level - 1) + (top - 1)

    def excl(level: int) -> int:
        return M + level - 1

    laws: list[OffspringLaw] = []
    a = np.zeros((K, K))
    for level in range(1, N):
        for top in (1, 2):
            swap = 3 - top
            outcomes: list[tuple[int | None, float]] = []
            only_i = only_i_upper if top == i else only_i_lower
            for j in range(1, N):
                outcomes.append((mixed(j, top), both * (1.0 - params.p) * rho[j - 1]))
                outcomes.append((mixed(j, swap), both * params.p * rho[j - 1]))
                outcomes.append((excl(j), only_i * rho[j - 1]))
            laws.append(_multinomial_law(K, read[level - 1], params.mean_friends, outcomes))
            row = mixed(level, top)
            if level < N - 1:
                a[row, mixed(level + 1, top)] = 1.0
            elif top == i:
                a[row, excl(N)] = 1.0
    for level in range(1, N + 1):
        outcomes = [(excl(j), eta[i] * rho[j - 1]) for j in range(1, N)]
        laws.append(_multinomial_law(K, read[level - 1], params.mean_friends, outcomes))
        if level < N:
            a[excl(level), excl(level + 1)] = 1.0
    return TcvdbpModel(M, E, params.theta, params.lambda_v, a, tuple(laws), boundary_shifts=True)
