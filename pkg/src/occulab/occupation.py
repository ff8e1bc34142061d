"""Normalized occupation functionals of critical fBm over exponential horizons.

One realization of

    F_n(t) = n^{-1/2} * int_0^{exp(n t)} f(B^H(s)) ds,      H = 1/d,

is computed by sampling the path on a uniform grid of spacing h and applying
the left-endpoint rule h * sum_k f(B(k h)).  The grid starts at 0 (the
integrand is bounded, so the [0,1) head differs from starting at 1 by
O(n^-1/2), below statistical resolution) and the O(exp(nt)/h)-term sum is
accumulated with compensated summation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fbm import FbmSpec, SeedLike, iter_path_blocks
from .functions import TestFunction

__all__ = ["GridTooLarge", "OccupationConfig", "OccupationSample", "realize", "realize_multi"]

DEFAULT_SPACING = 0.5
DEFAULT_GRID_CAP = 1 << 26


class GridTooLarge(ValueError):
    """The requested horizon needs more grid points than the configured cap."""


@dataclass(frozen=True)
class OccupationConfig:
    """Parameters of one occupation experiment (critical case hurst*dim == 1)."""

    n: float
    t: float
    f: TestFunction
    spacing: float = DEFAULT_SPACING
    grid_cap: int = DEFAULT_GRID_CAP

    def __post_init__(self):
        if self.n <= 0.0:
            raise ValueError("n must be positive")
        if self.t <= 0.0:
            raise ValueError("t must be positive")
        if self.spacing <= 0.0:
            raise ValueError("spacing must be positive")

    @property
    def dim(self) -> int:
        return self.f.dim

    @property
    def hurst(self) -> float:
        return 1.0 / self.f.dim

    def grid_points(self, t: float) -> int:
        """Number of left-endpoint grid points covering [0, exp(n t))."""
        points = int(math.ceil(math.exp(self.n * t) / self.spacing))
        if points > self.grid_cap:
            raise GridTooLarge(
                f"horizon exp({self.n}*{t}) at spacing {self.spacing} needs "
                f"{points} grid points, above the cap {self.grid_cap}"
            )
        return points

    def fbm_spec(self, max_t: float) -> FbmSpec:
        points = self.grid_points(max_t)
        return FbmSpec(
            hurst=self.hurst,
            dim=self.dim,
            step=self.spacing,
            n_steps=max(points - 1, 1),
            critical=True,
        )


@dataclass(frozen=True)
class OccupationSample:
    """One realized F_n(t) with its provenance."""

    value: float
    t: float
    config: OccupationConfig = field(repr=False)
    seed: object = field(repr=False)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("occupation value must be finite")


def realize(config: OccupationConfig, seed: SeedLike) -> OccupationSample:
    """One Monte Carlo realization of F_n(t); deterministic given (config, seed)."""
    return realize_multi(config, [config.t], seed)[0]


def realize_multi(
    config: OccupationConfig, t_list: Sequence[float], seed: SeedLike
) -> list[OccupationSample]:
    """Joint samples (F_n(t_1), ..., F_n(t_k)) from a single path.

    t_list must be ascending; the functional is evaluated cumulatively at each
    horizon exp(n t_i), so increments between entries are consistent for
    finite-dimensional statistics.  t = 0 is allowed as an interval anchor.
    """
    t_arr = [float(t) for t in t_list]
    if not t_arr:
        raise ValueError("t_list must be nonempty")
    if any(t < 0.0 for t in t_arr):
        raise ValueError("t values must be nonnegative")
    if any(b < a for a, b in zip(t_arr, t_arr[1:])):
        raise ValueError("t_list must be ascending")
    if t_arr[-1] <= 0.0:
        raise ValueError("the final horizon must be positive")

    cuts = np.array([config.grid_points(t) for t in t_arr], dtype=np.int64)
    n_max = int(cuts[-1])
    f = config.f

    # Kahan-compensated accumulator across blocks; inside a block numpy's
    # pairwise summation already keeps the error at eps*log(block).
    total = float(f.eval(np.zeros((1, config.dim)))[0])  # k = 0 term
    comp = 0.0
    cut_totals = np.zeros(len(cuts))
    ci = 0
    while ci < len(cuts) and cuts[ci] <= 1:
        cut_totals[ci] = total
        ci += 1

    if n_max > 1:
        spec = config.fbm_spec(t_arr[-1])
        for start, vals in iter_path_blocks(spec, seed):
            f_vals = np.asarray(f.eval(vals), dtype=float)
            m = f_vals.shape[0]
            while ci < len(cuts) and cuts[ci] <= start + m:
                include = int(cuts[ci]) - start
                partial = float(f_vals[:include].sum()) if include > 0 else 0.0
                cut_totals[ci] = total + partial
                ci += 1
            block_sum = float(f_vals.sum())
            y = block_sum - comp
            t_new = total + y
            comp = (t_new - total) - y
            total = t_new
    while ci < len(cuts):
        cut_totals[ci] = total
        ci += 1

    norm = config.spacing / math.sqrt(config.n)
    samples = []
    sup = f.sup_norm() if hasattr(f, "sup_norm") else None
    for t, points, acc in zip(t_arr, cuts, cut_totals):
        value = norm * acc
        if sup is not None:
            # crude a.s. bound ||f||_inf * (grid span) / sqrt(n)
            limit = sup * (float(points) * config.spacing) / math.sqrt(config.n)
            if abs(value) > limit * (1.0 + 1e-9) + 1e-12:
                raise AssertionError(
                    f"occupation value {value} exceeds the a.s. bound {limit}"
                )
        samples.append(OccupationSample(value=value, t=t, config=config, seed=seed))
    return samples
