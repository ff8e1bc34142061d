"""Deterministic sweeps over the covariance inequalities behind the limit laws.

Each sweep evaluates both sides of an inequality in closed form over a random
or gridded parameter set and counts floating-point violations.  Random sweeps
draw spacings log-uniformly: the interesting regimes are extreme gap ratios,
which uniform sampling would never visit.  Reports are reproducible bit for
bit given (seed, trials).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fbm import SeedLike, stream

__all__ = [
    "CheckReport",
    "check_cov_bounds",
    "check_taylor_bound",
    "check_lnd",
    "check_lower_inequality",
]

# absolute slack granted to every comparison; the closed forms are evaluated
# in double precision and cancellations can cost ~1e-12 at the scales swept
_FP_SLACK = 1e-9


@dataclass(frozen=True)
class CheckReport:
    check_name: str
    trials: int
    violations: int
    worst_margin: float  # smallest observed slack (bound minus value)
    parameters: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _log_uniform(rng, low: float, high: float, size) -> np.ndarray:
    return 10.0 ** rng.uniform(np.log10(low), np.log10(high), size=size)


def check_cov_bounds(trials: int, seed: SeedLike) -> CheckReport:
    """Bounds on the covariance of two separated fBm increments, H < 1/2.

    With gaps d2 = t2-t1, d3 = t3-t2, d4 = t4-t3 the (doubled) covariance
    magnitude expands to

        a = (d4+d3)^2H + (d3+d2)^2H - (d4+d3+d2)^2H - d3^2H  >= 0,

    which must stay below both
      (i)  2H (d2/d3)^{1/2-H} (d4/d3)^{1/2-H} d2^H d4^H, and
      (ii) 2 ((d2 ^ d4)/(d2 v d4))^H d2^H d4^H.
    The two bounds are not comparable to each other; only a <= each is checked.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = stream(seed)
    hurst = rng.uniform(0.01, 0.49, size=trials)
    d2 = _log_uniform(rng, 1e-3, 1e3, trials)
    d3 = _log_uniform(rng, 1e-3, 1e3, trials)
    d4 = _log_uniform(rng, 1e-3, 1e3, trials)
    two_h = 2.0 * hurst

    a = (d4 + d3) ** two_h + (d3 + d2) ** two_h - (d4 + d3 + d2) ** two_h - d3**two_h
    half_minus = 0.5 - hurst
    bound_i = (
        2.0 * hurst * (d2 / d3) ** half_minus * (d4 / d3) ** half_minus
        * d2**hurst * d4**hurst
    )
    bound_ii = (
        2.0 * (np.minimum(d2, d4) / np.maximum(d2, d4)) ** hurst * d2**hurst * d4**hurst
    )

    slack_i = bound_i - a
    slack_ii = bound_ii - a
    tol = _FP_SLACK * np.maximum(1.0, np.maximum(np.abs(a), bound_i))
    violations = int((slack_i < -tol).sum() + ((bound_ii - a) < -tol).sum())
    violations += int((a < -tol).sum())  # the expansion itself must be >= 0
    return CheckReport(
        check_name="cov_bounds",
        trials=trials,
        violations=violations,
        worst_margin=float(min(slack_i.min(), slack_ii.min())),
        parameters={"gap_range": [1e-3, 1e3], "hurst_range": [0.01, 0.49]},
        stats={"min_slack_i": float(slack_i.min()), "min_slack_ii": float(slack_ii.min())},
    )


def check_taylor_bound(grid_size: int = 200, hurst_points: int = 50) -> CheckReport:
    """(1+u)^2H + (1+v)^2H - (1+u+v)^2H - 1 lies in [0, 2Hu ^ 2Hv] for H < 1/2."""
    if grid_size < 2 or hurst_points < 2:
        raise ValueError("grid must have at least 2 points per axis")
    u = np.linspace(10.0 / grid_size, 10.0, grid_size)[:, None, None]
    v = np.linspace(10.0 / grid_size, 10.0, grid_size)[None, :, None]
    hurst = np.linspace(0.01, 0.49, hurst_points)[None, None, :]
    two_h = 2.0 * hurst
    bracket = (1.0 + u) ** two_h + (1.0 + v) ** two_h - (1.0 + u + v) ** two_h - 1.0

    slack_u = two_h * u - bracket
    slack_v = two_h * v - bracket
    violations = int((bracket < -_FP_SLACK).sum())
    violations += int((slack_u < -_FP_SLACK).sum() + (slack_v < -_FP_SLACK).sum())
    return CheckReport(
        check_name="taylor_bound",
        trials=bracket.size,
        violations=violations,
        worst_margin=float(min(slack_u.min(), slack_v.min(), bracket.min())),
        parameters={"grid_size": grid_size, "hurst_points": hurst_points},
        stats={"min_bracket": float(bracket.min())},
    )


def check_lnd(
    n_points: int,
    trials: int,
    seed: SeedLike,
    hurst: float | None = None,
    dim: int = 1,
) -> CheckReport:
    """Two-sided comparability of Var(sum x_i . dB_i) with sum |x_i|^2 ds_i^2H.

    The upper constant n_points is forced by Cauchy-Schwarz and is asserted;
    the lower constant is not constructive, so only the minimum observed ratio
    is reported (it must stay strictly positive).
    """
    if not 1 <= n_points <= 4:
        raise ValueError("n_points must be between 1 and 4")
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = stream(seed)
    h = np.full(trials, hurst) if hurst is not None else rng.uniform(0.01, 0.49, trials)
    gaps = _log_uniform(rng, 1e-3, 1e3, (trials, n_points))
    x = rng.standard_normal((trials, n_points, dim))

    grid = np.concatenate([np.zeros((trials, 1)), np.cumsum(gaps, axis=1)], axis=1)
    two_h = 2.0 * h
    pow_grid = grid ** two_h[:, None]  # grid^2H, shape (trials, n+1)
    marg = 0.5 * (
        pow_grid[:, :, None] + pow_grid[:, None, :]
        - np.abs(grid[:, :, None] - grid[:, None, :]) ** two_h[:, None, None]
    )
    incr_cov = (
        marg[:, 1:, 1:] - marg[:, 1:, :-1] - marg[:, :-1, 1:] + marg[:, :-1, :-1]
    )
    variance = np.einsum("tid,tij,tjd->t", x, incr_cov, x)
    weight = np.einsum("tid,ti->t", x * x, gaps ** (2.0 * h)[:, None])
    ratio = variance / weight

    upper_slack = n_points - ratio
    violations = int((upper_slack < -_FP_SLACK).sum() + (ratio <= 0.0).sum())
    return CheckReport(
        check_name="lnd",
        trials=trials,
        violations=violations,
        worst_margin=float(upper_slack.min()),
        parameters={"n_points": n_points, "dim": dim, "hurst": hurst},
        stats={"min_ratio": float(ratio.min()), "max_ratio": float(ratio.max())},
    )


def check_lower_inequality(
    u_points: int = 61,
    v_points: int = 41,
    x_points: int = 21,
    dims: tuple[int, ...] = (1, 2),
) -> CheckReport:
    """Gaussian integral lower bound at the critical index H d = 1.

    int exp(-|x1|^2 u^2H / 2 - v x1.x2) dx1 has the closed form
    (2 pi)^{d/2} u^{-Hd} exp(v^2 |x2|^2 / (2 u^2H)), which dominates
    (2 pi)^{d/2} u^{-1} because the exponent is nonnegative and H d = 1.
    """
    u = np.logspace(-1.0, 2.0, u_points)[:, None, None]
    v = np.linspace(-10.0, 10.0, v_points)[None, :, None]
    x2 = np.linspace(0.0, 10.0, x_points)[None, None, :]
    total = 0
    violations = 0
    worst = np.inf
    for d in dims:
        two_h = 2.0 / d
        front = (2.0 * np.pi) ** (d / 2.0)
        with np.errstate(over="ignore"):
            lhs = front * u**-1.0 * np.exp(v**2 * x2**2 / (2.0 * u**two_h))
        rhs = front / u
        slack = lhs - rhs
        total += slack.size
        violations += int((slack < -_FP_SLACK * rhs).sum())
        worst = min(worst, float(np.nanmin(slack)))
    return CheckReport(
        check_name="lower_inequality",
        trials=total,
        violations=violations,
        worst_margin=worst,
        parameters={
            "u_points": u_points,
            "v_points": v_points,
            "x_points": x_points,
            "dims": list(dims),
        },
    )
