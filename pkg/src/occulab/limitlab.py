"""Monte Carlo harnesses for the occupation-time limit laws.

Second-order law (mean-zero f): F_n(t) converges in law to C * sqrt(Z(t)) * eta
with Z(t) exponential of mean t and eta standard normal, i.e. a Laplace
distribution with scale C * sqrt(t/2).  Its even moments are

    E[(sqrt(Z(t)) eta)^{2m}] = (2m)! t^m / 2^m,

odd moments vanish.  First-order law (nonnegative f): n^{-1} * int f(B) over
the same horizon converges to ((2 pi)^{-d/2} int f) * Z(t).  The limit time
change Z(t) itself is simulated mechanically by a random-walk approximation.

All estimators are deterministic given (seed, replicas): replica r derives the
stream (seed, r), reductions run in replica order, and a `map_fn` hook lets a
process pool evaluate replicas without changing any numeric output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import constants
from .fbm import SeedLike, derived_seed, stream
from .occupation import OccupationConfig, realize, realize_multi

__all__ = [
    "HorizonExhausted",
    "LimitTarget",
    "MomentEstimate",
    "MomentSummary",
    "ZProcessSample",
    "FddReport",
    "target_moment",
    "target_raw_moment",
    "run_second_order",
    "run_first_order",
    "simulate_z",
    "z_process_summary",
    "run_fdd",
]

MAX_MOMENT_ORDER = 6

# reserved spawn-key offset for auxiliary streams (bootstrap), far above any
# replica index so replica and auxiliary streams can never collide
_AUX_STREAM = 1 << 48


class HorizonExhausted(RuntimeError):
    """The walk's step budget ran out before the running maximum hit its level."""


# --------------------------------------------------------------------------
# targets
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LimitTarget:
    """Distributional target of the second-order law at horizon exponent t."""

    c_fd: float
    t: float

    @property
    def laplace_scale(self) -> float:
        return self.c_fd * math.sqrt(self.t / 2.0)


def target_moment(m: int, t: float, c: float = 1.0) -> float:
    """(2m)-th moment of c * sqrt(Z(t)) * eta: c^{2m} (2m)! t^m / 2^m."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    return c ** (2 * m) * math.factorial(2 * m) * t**m / 2.0**m


def target_raw_moment(order: int, t: float, c: float = 1.0) -> float:
    """Raw moment of any order; odd orders vanish by symmetry of eta."""
    if order < 1:
        raise ValueError("order must be a positive integer")
    if order % 2 == 1:
        return 0.0
    return target_moment(order // 2, t, c)


# --------------------------------------------------------------------------
# summaries
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentEstimate:
    order: int
    estimate: float
    se: float
    target: float  # nan when the limit law does not pin this order


@dataclass(frozen=True)
class MomentSummary:
    replicas: int
    t: float
    scale: float
    moments: tuple[MomentEstimate, ...]
    ks_distance: float
    ks_se: float
    kurtosis: float
    kurtosis_se: float

    def moment(self, order: int) -> MomentEstimate:
        return self.moments[order - 1]


@dataclass(frozen=True)
class ZProcessSample:
    t: float
    value: float
    walk_steps: int

    def __post_init__(self):
        if self.value < 0.0:
            raise ValueError("local-time value must be nonnegative")


@dataclass(frozen=True)
class FddReport:
    """Joint statistics of occupation increments over disjoint intervals."""

    intervals: tuple[tuple[float, float], ...]
    summaries: tuple[MomentSummary, ...]
    cross_cov: np.ndarray = field(repr=False)
    cross_cov_se: np.ndarray = field(repr=False)
    replicas: int
    scale: float


def _ks_distance(sample: np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    xs = np.sort(sample)
    vals = cdf(xs)
    n = xs.size
    grid = np.arange(1, n + 1) / n
    return float(max((grid - vals).max(), (vals - grid + 1.0 / n).max()))


def laplace_cdf(scale: float) -> Callable[[np.ndarray], np.ndarray]:
    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0.0, 0.5 * np.exp(x / scale), 1.0 - 0.5 * np.exp(-x / scale))

    return cdf


def exponential_cdf(mean: float) -> Callable[[np.ndarray], np.ndarray]:
    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0.0, 0.0, 1.0 - np.exp(-x / mean))

    return cdf


def _ks_bootstrap_se(sample, cdf, rng, resamples: int = 200) -> float:
    n = sample.size
    stats = np.empty(resamples)
    for b in range(resamples):
        stats[b] = _ks_distance(sample[rng.integers(0, n, size=n)], cdf)
    return float(stats.std(ddof=1))


def _excess_kurtosis_jackknife(x: np.ndarray) -> tuple[float, float]:
    """Excess kurtosis and its leave-one-out jackknife standard error."""
    r = x.size
    s1, s2, s3, s4 = x.sum(), (x**2).sum(), (x**3).sum(), (x**4).sum()
    m1 = s1 / r
    m2c = s2 / r - m1**2
    m4c = s4 / r - 4.0 * (s3 / r) * m1 + 6.0 * (s2 / r) * m1**2 - 3.0 * m1**4
    est = m4c / m2c**2 - 3.0
    l1 = (s1 - x) / (r - 1)
    l2 = (s2 - x**2) / (r - 1)
    l3 = (s3 - x**3) / (r - 1)
    l4 = (s4 - x**4) / (r - 1)
    v2 = l2 - l1**2
    v4 = l4 - 4.0 * l3 * l1 + 6.0 * l2 * l1**2 - 3.0 * l1**4
    loo = v4 / v2**2 - 3.0
    se = math.sqrt((r - 1) / r * float(((loo - loo.mean()) ** 2).sum()))
    return float(est), se


def _summarize(
    standardized: np.ndarray,
    t: float,
    scale: float,
    target_fn: Callable[[int], float],
    ks_cdf: Callable[[np.ndarray], np.ndarray] | None,
    ks_rng: np.random.Generator | None,
) -> MomentSummary:
    r = standardized.size
    rows = []
    for order in range(1, MAX_MOMENT_ORDER + 1):
        powers = standardized**order
        estimate = float(powers.mean())
        # for a sample mean the leave-one-out jackknife SE reduces to sd/sqrt(R)
        se = float(powers.std(ddof=1)) / math.sqrt(r)
        rows.append(MomentEstimate(order, estimate, se, target_fn(order)))
    if ks_cdf is None:
        ks, ks_se = float("nan"), float("nan")
    else:
        ks = _ks_distance(standardized, ks_cdf)
        ks_se = _ks_bootstrap_se(standardized, ks_cdf, ks_rng)
    kurt, kurt_se = _excess_kurtosis_jackknife(standardized)
    return MomentSummary(
        replicas=r,
        t=t,
        scale=scale,
        moments=tuple(rows),
        ks_distance=ks,
        ks_se=ks_se,
        kurtosis=kurt,
        kurtosis_se=kurt_se,
    )


# --------------------------------------------------------------------------
# replica workers (module level so process pools can pickle them)
# --------------------------------------------------------------------------

def _occupation_value(args) -> float:
    config, seed, replica = args
    return realize(config, derived_seed(seed, replica)).value


def _multi_values(args) -> np.ndarray:
    config, t_list, seed, replica = args
    samples = realize_multi(config, list(t_list), derived_seed(seed, replica))
    return np.array([s.value for s in samples])


def _z_value(args) -> float:
    t, walk_steps, max_step_factor, seed, replica = args
    return simulate_z(t, walk_steps, derived_seed(seed, replica), max_step_factor).value


def _replica_array(
    worker, payloads: Iterable, map_fn: Callable | None
) -> np.ndarray:
    results = list((map_fn or map)(worker, list(payloads)))
    return np.asarray(results, dtype=float)


# --------------------------------------------------------------------------
# harnesses
# --------------------------------------------------------------------------

def run_second_order(
    config: OccupationConfig,
    replicas: int,
    seed: SeedLike,
    *,
    scale: float | None = None,
    map_fn: Callable | None = None,
) -> MomentSummary:
    """Estimate moments 1..6 and the Laplace KS distance of F_n(t) / C.

    Values are standardized by the limit constant (computed from the
    quadrature module unless supplied), so the targets are (2m)! t^m / 2^m for
    even orders and 0 for odd.  The KS distance is reported against the
    Laplace CDF with scale sqrt(t/2); asymptotic laws at finite n fail exact
    tests by design, so trends over n are the meaningful acceptance surface.
    """
    if replicas < 100:
        raise ValueError("need at least 100 replicas for stable summaries")
    if scale is None:
        scale = constants.c_fd(config.f).c_fd
    values = _replica_array(
        _occupation_value, ((config, seed, r) for r in range(replicas)), map_fn
    )
    x = values / scale
    t = config.t
    return _summarize(
        x,
        t,
        scale,
        lambda order: target_raw_moment(order, t),
        laplace_cdf(math.sqrt(t / 2.0)),
        stream(seed, _AUX_STREAM),
    )


def run_first_order(
    config: OccupationConfig,
    replicas: int,
    seed: SeedLike,
    *,
    map_fn: Callable | None = None,
) -> MomentSummary:
    """Estimate the law of n^{-1} int_0^{exp(nt)} f(B) ds for nonnegative f.

    The target is exponential with mean t * (2 pi)^{-d/2} * int f; the summary
    reports raw moments (targets m! mean^m) and the KS distance to that
    exponential.
    """
    if replicas < 100:
        raise ValueError("need at least 100 replicas for stable summaries")
    total_mass = config.f.integral()
    if total_mass <= 0.0:
        raise ValueError("first-order law requires int f > 0")
    values = _replica_array(
        _occupation_value, ((config, seed, r) for r in range(replicas)), map_fn
    )
    g = values / math.sqrt(config.n)  # n^{-1} normalization on top of n^{-1/2}
    mean_target = config.t * (2.0 * math.pi) ** (-config.dim / 2.0) * total_mass
    return _summarize(
        g,
        config.t,
        1.0,
        lambda order: math.factorial(order) * mean_target**order,
        exponential_cdf(mean_target),
        stream(seed, _AUX_STREAM),
    )


# --------------------------------------------------------------------------
# limit time change Z(t): local time at the inverse running maximum
# --------------------------------------------------------------------------

def _ruin_games(
    rng: np.random.Generator, level: int, games: int, budget: int
) -> tuple[np.ndarray, int]:
    """Simulate `games` +-1 walks from 1 absorbed at {0, level}.

    Returns (reached_level boolean per game, total simulated steps).  Games
    run side by side as matrix rows with doubling block widths, so the cost is
    a few numpy passes over roughly sum-of-durations elements.
    """
    outcome = np.zeros(games, dtype=bool)
    if level <= 1:
        return ~outcome, 0
    pos = np.ones(games, dtype=np.int64)
    alive = np.ones(games, dtype=bool)
    width = 1024
    steps = 0
    while alive.any():
        idx = np.flatnonzero(alive)
        draws = rng.integers(0, 2, size=(idx.size, width), dtype=np.int64) * 2 - 1
        paths = pos[idx, None] + np.cumsum(draws, axis=1)
        absorbed = (paths <= 0) | (paths >= level)
        hit = absorbed.any(axis=1)
        first = np.argmax(absorbed, axis=1)
        steps += int(first[hit].sum() + hit.sum()) + int((~hit).sum()) * width
        rows = idx[hit]
        outcome[rows] = paths[hit, first[hit]] >= level
        alive[rows] = False
        pos[idx[~hit]] = paths[~hit, -1]
        width = min(width * 2, 1 << 16)
        if steps > budget:
            break
    return outcome, steps


def simulate_z(
    t: float, walk_steps: int, seed: SeedLike, max_step_factor: int = 100
) -> ZProcessSample:
    """Random-walk sample of Z(t): local time at 0 when the running max hits t.

    A +-1 walk at scale sqrt(walk_steps) is run until its running maximum
    first reaches ceil(t * sqrt(walk_steps)); the returned value is the
    number of visits to 0 divided by 2 * sqrt(walk_steps), which converges to
    an exponential of mean t.  (Visit counts of the +-1 walk are twice the
    Tanaka local time at the hitting scale: up- and down-side excursions each
    produce a return, hence the factor 1/2.)

    Excursions below 0 can never advance the running maximum, so only their
    visit counts are drawn (fair coins); the above-0 excursions are simulated
    mechanically step by step.  Skipping the below-0 durations leaves the law
    of the returned statistic untouched while removing the heavy-tailed
    wandering time, and the step budget max_step_factor * walk_steps counts
    the simulated steps; exhausting it raises HorizonExhausted, which signals
    walk_steps too small for the requested t.
    """
    if walk_steps < 10**4:
        raise ValueError("walk_steps must be at least 10^4")
    if t <= 0.0:
        raise ValueError("t must be positive")
    scale = math.sqrt(walk_steps)
    level = int(math.ceil(t * scale))
    rng = stream(seed)
    budget = max_step_factor * walk_steps
    used = 0
    games_done = 0
    batch = 128
    first_win = None
    while first_win is None:
        outcomes, steps = _ruin_games(rng, level, batch, budget - used)
        used += steps
        if used > budget:
            raise HorizonExhausted(
                f"walk exhausted {max_step_factor} * walk_steps simulated steps "
                f"before the running maximum reached {level}"
            )
        wins = np.flatnonzero(outcomes)
        if wins.size:
            first_win = games_done + int(wins[0]) + 1
        else:
            games_done += batch
    # fair coins decide each excursion's side: below-0 excursions between the
    # first_win games above 0 form a negative binomial count
    below = int(rng.negative_binomial(first_win, 0.5))
    visits = first_win + below
    return ZProcessSample(t=t, value=visits / (2.0 * scale), walk_steps=walk_steps)


def z_process_summary(
    t: float,
    walk_steps: int,
    replicas: int,
    seed: SeedLike,
    *,
    max_step_factor: int = 100,
    map_fn: Callable | None = None,
) -> MomentSummary:
    """Replicated simulate_z with moments and KS distance against Exp(mean t)."""
    values = _replica_array(
        _z_value,
        ((t, walk_steps, max_step_factor, seed, r) for r in range(replicas)),
        map_fn,
    )
    return _summarize(
        values,
        t,
        1.0,
        lambda order: math.factorial(order) * t**order,
        exponential_cdf(t),
        stream(seed, _AUX_STREAM),
    )


# --------------------------------------------------------------------------
# finite-dimensional structure
# --------------------------------------------------------------------------

def run_fdd(
    config: OccupationConfig,
    intervals: Sequence[tuple[float, float]],
    replicas: int,
    seed: SeedLike,
    *,
    scale: float | None = None,
    map_fn: Callable | None = None,
) -> FddReport:
    """Joint increment statistics of F_n over disjoint ascending intervals.

    For each interval (a, b] the standardized increment (F_n(b) - F_n(a)) / C
    targets variance b - a; increments over disjoint intervals target zero
    cross-covariance.  Intervals anchored at a = 0 additionally target the
    full Laplace law of the single-horizon statistic.
    """
    if replicas < 100:
        raise ValueError("need at least 100 replicas for stable summaries")
    pairs = [(float(a), float(b)) for a, b in intervals]
    if not pairs:
        raise ValueError("need at least one interval")
    for a, b in pairs:
        if a < 0.0 or b <= a:
            raise ValueError(f"interval ({a}, {b}] is not valid")
    for (_, b0), (a1, _) in zip(pairs, pairs[1:]):
        if a1 < b0:
            raise ValueError("intervals must be disjoint and ascending")
    if scale is None:
        scale = constants.c_fd(config.f).c_fd

    boundaries = sorted({x for pair in pairs for x in pair})
    index = {x: i for i, x in enumerate(boundaries)}
    joint = list(
        (map_fn or map)(
            _multi_values,
            [(config, tuple(boundaries), seed, r) for r in range(replicas)],
        )
    )
    values = np.vstack(joint) / scale
    incr = np.column_stack([values[:, index[b]] - values[:, index[a]] for a, b in pairs])

    summaries = []
    for k, (a, b) in enumerate(pairs):
        span = b - a

        def target(order, span=span, anchored=(a == 0.0)):
            if order % 2 == 1:
                return 0.0
            if order == 2:
                return span
            return target_raw_moment(order, span) if anchored else float("nan")

        ks_cdf = laplace_cdf(math.sqrt(span / 2.0)) if a == 0.0 else None
        summaries.append(
            _summarize(
                incr[:, k],
                span,
                scale,
                target,
                ks_cdf,
                stream(seed, _AUX_STREAM, k) if ks_cdf else None,
            )
        )

    centered = incr - incr.mean(axis=0)
    k = len(pairs)
    cov = np.zeros((k, k))
    cov_se = np.zeros((k, k))
    r = replicas
    for i in range(k):
        for j in range(k):
            prod = centered[:, i] * centered[:, j]
            cov[i, j] = prod.sum() / (r - 1)
            cov_se[i, j] = prod.std(ddof=1) / math.sqrt(r)
    return FddReport(
        intervals=tuple(pairs),
        summaries=tuple(summaries),
        cross_cov=cov,
        cross_cov_se=cov_se,
        replicas=replicas,
        scale=scale,
    )
