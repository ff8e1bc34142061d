"""Exact simulation of d-dimensional fractional Brownian motion on uniform grids.

Two exact-in-law samplers are provided:

* :func:`sample_circulant` -- Davies-Harte circulant embedding, O(N log N).
  The unit-spacing increment autocovariance gamma(k) is embedded in a
  circulant matrix diagonalized by the FFT (Davies & Harte 1987; Dieker 2004).
* :func:`sample_cholesky` -- lower-triangular factorization of the increment
  covariance, O(N^2)-O(N^3).  Slow but transparent; used as the ground-truth
  oracle against the FFT path.

Coordinates are independent; each (seed, coordinate) pair owns a private
random stream derived through ``numpy.random.SeedSequence`` spawn keys, so
results are reproducible independently of scheduling or block sizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Union

import numpy as np

__all__ = [
    "EmbeddingNotPSD",
    "NotPositiveDefinite",
    "FbmSpec",
    "FbmPath",
    "covariance",
    "fgn_autocovariance",
    "increment_covariance_matrix",
    "circulant_eigenvalues",
    "sample_circulant",
    "sample_cholesky",
    "iter_path_blocks",
    "derived_seed",
    "stream",
]

SeedLike = Union[int, np.random.SeedSequence]

#: relative tolerance below which negative circulant eigenvalues are treated
#: as rounding noise and clamped to zero
EIG_TOL_REL = 1e-8

#: Cholesky pivots below this are considered numerically degenerate
PIVOT_TOL = 1e-12


class EmbeddingNotPSD(RuntimeError):
    """Circulant embedding produced an eigenvalue below -tol * max eigenvalue."""


class NotPositiveDefinite(RuntimeError):
    """Increment covariance failed its Cholesky factorization."""


# --------------------------------------------------------------------------
# seeding: splittable streams via SeedSequence spawn keys
# --------------------------------------------------------------------------

def derived_seed(seed: SeedLike, *path: int) -> np.random.SeedSequence:
    """Child SeedSequence for a (replica, coordinate, ...) path.

    Children are derived purely from (entropy, spawn_key), never from spawn
    counters, so any worker can rebuild any stream independently.
    """
    if isinstance(seed, np.random.SeedSequence):
        base_entropy, base_key = seed.entropy, seed.spawn_key
    else:
        base_entropy, base_key = int(seed), ()
    return np.random.SeedSequence(entropy=base_entropy, spawn_key=base_key + tuple(path))


def stream(seed: SeedLike, *path: int) -> np.random.Generator:
    """Generator owning the stream at ``path`` below ``seed``."""
    return np.random.Generator(np.random.SFC64(derived_seed(seed, *path)))


# --------------------------------------------------------------------------
# model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FbmSpec:
    """Gaussian model to sample: Hurst index, dimension and uniform grid.

    ``critical=True`` asserts hurst * dim == 1, the regime in which the
    occupation-time experiments live.
    """

    hurst: float
    dim: int
    step: float
    n_steps: int
    critical: bool = False

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"hurst must lie in (0,1), got {self.hurst}")
        if self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if self.step <= 0.0:
            raise ValueError(f"step must be positive, got {self.step}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.critical and abs(self.hurst * self.dim - 1.0) > 1e-12:
            raise ValueError(
                f"critical spec requires hurst*dim == 1, got {self.hurst * self.dim}"
            )

    @property
    def horizon(self) -> float:
        return self.step * self.n_steps


@dataclass(frozen=True)
class FbmPath:
    """One realization: times (n_steps+1,) from 0, values (n_steps+1, dim)."""

    spec: FbmSpec
    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.values.shape != (self.spec.n_steps + 1, self.spec.dim):
            raise ValueError("values shape does not match spec")
        if not np.all(self.values[0] == 0.0):
            raise ValueError("path must start at the origin")

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)


def covariance(s, t, hurst: float):
    """Marginal covariance (1/2)(t^2H + s^2H - |t-s|^2H) of one coordinate."""
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"hurst must lie in (0,1), got {hurst}")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0.0) or np.any(t < 0.0):
        raise ValueError("times must be nonnegative")
    two_h = 2.0 * hurst
    out = 0.5 * (t**two_h + s**two_h - np.abs(t - s) ** two_h)
    return out if out.ndim else float(out)


def fgn_autocovariance(lag, hurst: float):
    """Autocovariance gamma(k) of unit-spacing fractional Gaussian noise.

    gamma(k) = (1/2)(|k+1|^2H + |k-1|^2H - 2|k|^2H), gamma(0) = 1.
    """
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"hurst must lie in (0,1), got {hurst}")
    k = np.asarray(lag, dtype=float)
    two_h = 2.0 * hurst
    out = 0.5 * (
        np.abs(k + 1.0) ** two_h + np.abs(k - 1.0) ** two_h - 2.0 * np.abs(k) ** two_h
    )
    return out if out.ndim else float(out)


def increment_covariance_matrix(spec: FbmSpec) -> np.ndarray:
    """Exact (n_steps x n_steps) covariance of the per-coordinate increments."""
    lags = np.abs(np.subtract.outer(np.arange(spec.n_steps), np.arange(spec.n_steps)))
    return spec.step ** (2.0 * spec.hurst) * fgn_autocovariance(lags, spec.hurst)


# --------------------------------------------------------------------------
# circulant embedding
# --------------------------------------------------------------------------

@lru_cache(maxsize=16)
def _circulant_eigs_cached(n_incr: int, hurst: float):
    size = 1
    while size < max(2 * (n_incr - 1), 2):
        size *= 2
    idx = np.arange(size)
    row = fgn_autocovariance(np.minimum(idx, size - idx), hurst)
    eig = np.fft.fft(row).real
    floor = eig.min()
    if floor < -EIG_TOL_REL * eig.max():
        raise EmbeddingNotPSD(
            f"circulant embedding not PSD: min eigenvalue {floor:.3e} "
            f"(max {eig.max():.3e}) at n_incr={n_incr}, H={hurst}"
        )
    np.clip(eig, 0.0, None, out=eig)
    eig.flags.writeable = False
    return eig, size


def circulant_eigenvalues(n_incr: int, hurst: float) -> tuple[np.ndarray, int]:
    """Eigenvalues of the minimal power-of-two circulant embedding of gamma.

    The embedding size is the first power of two >= 2*(n_incr-1); eigenvalues
    in (-tol, 0) are clamped to zero, anything lower raises EmbeddingNotPSD.
    """
    return _circulant_eigs_cached(int(n_incr), float(hurst))


def _fgn_circulant(n_incr: int, hurst: float, rng: np.random.Generator) -> np.ndarray:
    """n_incr unit-spacing fGn variates through the FFT of the embedding."""
    eig, size = circulant_eigenvalues(n_incr, hurst)
    amp = np.sqrt(eig / size)
    z = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return np.fft.fft(amp * z).real[:n_incr]


def sample_circulant(spec: FbmSpec, seed: SeedLike) -> FbmPath:
    """Exact fBm path via circulant embedding of the increment covariance.

    Per coordinate c the stream is derived from (seed, c); the path is the
    cumulative sum of step^H-scaled fGn, so values[0] == 0 exactly.
    Deterministic given (spec, seed).
    """
    scale = spec.step**spec.hurst
    values = np.zeros((spec.n_steps + 1, spec.dim))
    for c in range(spec.dim):
        rng = stream(seed, c)
        incr = scale * _fgn_circulant(spec.n_steps, spec.hurst, rng)
        np.cumsum(incr, out=values[1:, c])
    times = spec.step * np.arange(spec.n_steps + 1)
    return FbmPath(spec=spec, times=times, values=values)


# --------------------------------------------------------------------------
# Cholesky oracle
# --------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _cholesky_factor_cached(n_incr: int, hurst: float, step: float):
    cov = step ** (2.0 * hurst) * fgn_autocovariance(
        np.abs(np.subtract.outer(np.arange(n_incr), np.arange(n_incr))), hurst
    )
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as err:
        raise NotPositiveDefinite(f"increment covariance not PD: {err}") from err
    if (factor.diagonal() ** 2).min() < PIVOT_TOL:
        raise NotPositiveDefinite(
            f"Cholesky pivot below {PIVOT_TOL:g}: numerically degenerate spec"
        )
    factor.flags.writeable = False
    return factor


def sample_cholesky(spec: FbmSpec, seed: SeedLike, cap: int = 2048) -> FbmPath:
    """Exact fBm path via Cholesky factorization of the increment covariance.

    O(N^2) per sample after an O(N^3) factorization (cached across calls with
    the same spec); intended as a cross-validation oracle for
    :func:`sample_circulant`, hence the size cap.
    """
    if spec.n_steps > cap:
        raise ValueError(f"n_steps={spec.n_steps} exceeds Cholesky cap {cap}")
    factor = _cholesky_factor_cached(spec.n_steps, spec.hurst, spec.step)
    values = np.zeros((spec.n_steps + 1, spec.dim))
    for c in range(spec.dim):
        rng = stream(seed, c)
        incr = factor @ rng.standard_normal(spec.n_steps)
        np.cumsum(incr, out=values[1:, c])
    times = spec.step * np.arange(spec.n_steps + 1)
    return FbmPath(spec=spec, times=times, values=values)


# --------------------------------------------------------------------------
# blockwise streaming (for very long occupation grids)
# --------------------------------------------------------------------------

def iter_path_blocks(
    spec: FbmSpec, seed: SeedLike, block: int = 1 << 18
) -> Iterator[tuple[int, np.ndarray]]:
    """Yield the path at grid indices 1..n_steps in blocks of (m, dim) values.

    The origin point (index 0, value 0) is not emitted.  At hurst == 1/2 the
    increments are independent, so blocks are generated on the fly in O(block)
    memory with the same per-(seed, coordinate) streams as the materialized
    samplers; for any other hurst the increments are materialized once via the
    circulant embedding (identical values to :func:`sample_circulant`) and
    emitted in slices.
    """
    n = spec.n_steps
    if spec.hurst == 0.5:
        rngs = [stream(seed, c) for c in range(spec.dim)]
        scale = np.sqrt(spec.step)
        carry = np.zeros(spec.dim)
        done = 0
        while done < n:
            m = min(block, n - done)
            vals = np.empty((m, spec.dim))
            for c in range(spec.dim):
                np.cumsum(rngs[c].standard_normal(m), out=vals[:, c])
                vals[:, c] *= scale
                vals[:, c] += carry[c]
                carry[c] = vals[-1, c]
            yield done + 1, vals
            done += m
    else:
        path = sample_circulant(spec, seed)
        for start in range(1, n + 1, block):
            stop = min(start + block, n + 1)
            yield start, path.values[start:stop]
