"""Test-function family for the occupation functionals.

Two kinds, both bounded, rapidly decaying and radial with closed-form
Fourier transforms (convention fhat(xi) = int f(x) exp(-i xi.x) dx):

* ``gaussian_difference``: f(x) = exp(-|x|^2/2) - sigma^-d exp(-|x|^2/(2 sigma^2)),
  exactly mean-zero for every sigma != 1; the input of the second-order law.
* ``plain_gaussian``: f(x) = exp(-|x|^2/2), nonnegative with integral
  (2 pi)^{d/2}; the input of the first-order law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["GAUSSIAN_DIFFERENCE", "PLAIN_GAUSSIAN", "TestFunction"]

GAUSSIAN_DIFFERENCE = "gaussian_difference"
PLAIN_GAUSSIAN = "plain_gaussian"


@dataclass(frozen=True)
class TestFunction:
    """A member of the family, with decay exponent beta in (0, 1]."""

    dim: int
    kind: str = GAUSSIAN_DIFFERENCE
    sigma: float = 2.0
    beta: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if self.kind not in (GAUSSIAN_DIFFERENCE, PLAIN_GAUSSIAN):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == GAUSSIAN_DIFFERENCE and (self.sigma <= 0.0 or self.sigma == 1.0):
            raise ValueError("gaussian_difference requires sigma > 0, sigma != 1")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")

    # -- point evaluation ---------------------------------------------------

    def eval(self, x) -> np.ndarray:
        """Pointwise values; x has shape (..., dim)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected last axis {self.dim}, got {x.shape[-1]}")
        return self.eval_sumsq(np.einsum("...i,...i->...", x, x))

    def eval_sumsq(self, q) -> np.ndarray:
        """Values as a function of q = |x|^2 (the family is radial)."""
        q = np.asarray(q, dtype=float)
        if self.kind == PLAIN_GAUSSIAN:
            return np.exp(-0.5 * q)
        s2 = self.sigma * self.sigma
        return np.exp(-0.5 * q) - self.sigma ** (-self.dim) * np.exp(-0.5 * q / s2)

    def radial_profile(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.eval_sumsq(r * r)

    # -- Fourier side ---------------------------------------------------------

    def fourier(self, xi) -> np.ndarray:
        """Closed-form Fourier transform; xi has shape (..., dim)."""
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-1] != self.dim:
            raise ValueError(f"expected last axis {self.dim}, got {xi.shape[-1]}")
        return self.fourier_radial(np.sqrt(np.einsum("...i,...i->...", xi, xi)))

    def fourier_radial(self, r) -> np.ndarray:
        """fhat as a function of r = |xi| (fhat is real and radial)."""
        r = np.asarray(r, dtype=float)
        q = r * r
        front = (2.0 * math.pi) ** (self.dim / 2.0)
        if self.kind == PLAIN_GAUSSIAN:
            out = front * np.exp(-0.5 * q)
        else:
            s2 = self.sigma * self.sigma
            out = front * (np.exp(-0.5 * q) - np.exp(-0.5 * s2 * q))
        return out if out.ndim else float(out)

    # -- exact functionals ----------------------------------------------------

    def integral(self) -> float:
        """int f(x) dx, exactly."""
        if self.kind == PLAIN_GAUSSIAN:
            return (2.0 * math.pi) ** (self.dim / 2.0)
        return 0.0

    @property
    def mean_zero(self) -> bool:
        return self.integral() == 0.0

    def sup_norm(self) -> float:
        """sup |f|, from the radial profile's two candidate extrema."""
        if self.kind == PLAIN_GAUSSIAN:
            return 1.0
        s2 = self.sigma * self.sigma
        # g'(r) = 0 at r^2 = 2 (d+2) ln(sigma) / (1 - sigma^-2), valid both sides of 1
        r2 = 2.0 * (self.dim + 2.0) * math.log(self.sigma) / (1.0 - 1.0 / s2)
        candidates = [abs(float(self.eval_sumsq(0.0)))]
        if r2 > 0.0:
            candidates.append(abs(float(self.eval_sumsq(r2))))
        return max(candidates)

    # -- CLI flag -------------------------------------------------------------

    @classmethod
    def from_flag(cls, text: str, dim: int) -> "TestFunction":
        """Parse flags like ``gaussdiff:sigma=2`` or ``gauss``."""
        name, _, rest = text.partition(":")
        params = {}
        for item in filter(None, rest.split(",")):
            key, _, value = item.partition("=")
            params[key.strip()] = float(value)
        if name in ("gaussdiff", GAUSSIAN_DIFFERENCE):
            return cls(dim=dim, kind=GAUSSIAN_DIFFERENCE, sigma=params.pop("sigma", 2.0), **params)
        if name in ("gauss", "plain", PLAIN_GAUSSIAN):
            return cls(dim=dim, kind=PLAIN_GAUSSIAN, **params)
        raise ValueError(f"unknown function family {name!r}")
