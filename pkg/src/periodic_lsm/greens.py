"""Free-space and quasi-periodic Green functions, modes and Wood diagnostics.

Conventions
-----------
Time dependence ``exp(-i omega t)``.  Points are arrays whose last axis holds
coordinates; the final coordinate is vertical, the others lateral (one lateral
axis in 2D, two in 3D).  The lateral reciprocal lattice is
``alpha_n = alpha + 2 pi n / period`` and the vertical wavenumbers are

    beta_n = sqrt(k^2 - |alpha_n|^2)        if |alpha_n| < k
    beta_n = i sqrt(|alpha_n|^2 - k^2)      if |alpha_n| > k

The quasi-periodic Green function is the truncated spectral series

    G(x, y) = 1/(2 |cell|) sum_n 1/(i beta_n) exp(i alpha_n.(x'-y') + i beta_n |x3-y3|)

with ``|cell|`` the lateral cell size (``2 pi`` in 2D, ``4 pi^2`` in 3D for the
default period).  With this prefactor ``G`` equals *minus* the lattice sum of
``greens_free``; it satisfies ``(Delta + k^2) G = 0`` off the source lattice.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import special

from .errors import CoincidentPoints, VerticalCoincidence, WoodAnomaly

WOOD_TOL = 1e-8
SEP_TOL_REL = 1e-3
TWO_PI = 2 * np.pi


def _beta_branch(k2_minus_a2):
    """Outgoing branch of sqrt(k^2 - |alpha_n|^2): positive real or positive imaginary."""
    d = np.asarray(k2_minus_a2, dtype=float)
    return np.where(d > 0, np.sqrt(np.abs(d)) + 0j, 1j * np.sqrt(np.abs(d)))


def default_trunc(k: float, period: float) -> int:
    return max(30, math.ceil(3 * k * period / TWO_PI))


@dataclass(frozen=True)
class ModeIndex:
    n: tuple
    alpha_n: tuple
    beta_n: complex
    propagating: bool


@dataclass(frozen=True)
class WaveParams:
    """Wavenumber, quasi-momentum, period and truncation order.

    ``alpha`` has one component in 2D and two in 3D; ``period`` defaults to
    ``2 pi`` per lateral axis and ``trunc`` to
    ``max(30, ceil(3 k period / 2 pi))``.  Construction raises
    :class:`WoodAnomaly` if any mode with ``|n_j| <= trunc`` has
    ``|beta_n| <= WOOD_TOL * k``, unless ``check_wood=False`` (used only by
    :func:`wood_scan`).
    """

    k: float
    alpha: tuple
    period: tuple | None = None
    trunc: int | None = None
    check_wood: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        alpha = tuple(float(a) for a in np.atleast_1d(self.alpha))
        if len(alpha) not in (1, 2):
            raise ValueError("alpha must have 1 (2D) or 2 (3D) components")
        period = self.period
        if period is None:
            period = (TWO_PI,) * len(alpha)
        period = tuple(float(p) for p in np.broadcast_to(np.atleast_1d(period), (len(alpha),)))
        if not self.k > 0:
            raise ValueError(f"k must be positive, got {self.k}")
        if any(p <= 0 for p in period):
            raise ValueError("period components must be positive")
        trunc = self.trunc
        if trunc is None:
            trunc = default_trunc(self.k, max(period))
        if int(trunc) != trunc or trunc < 0:
            raise ValueError("trunc must be a non-negative integer")
        object.__setattr__(self, "k", float(self.k))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "period", period)
        object.__setattr__(self, "trunc", int(trunc))
        if self.check_wood:
            bad = np.abs(self.beta) <= WOOD_TOL * self.k
            if np.any(bad):
                n = tuple(int(v) for v in self.indices[np.argmax(bad)])
                raise WoodAnomaly(f"Wood anomaly: beta_n ~ 0 for n={n} (k={self.k}, alpha={self.alpha})")

    @property
    def dim(self) -> int:
        return len(self.alpha) + 1

    @property
    def cell_size(self) -> float:
        return float(np.prod(self.period))

    @property
    def sep_tol(self) -> float:
        return SEP_TOL_REL * max(self.period)

    @cached_property
    def indices(self) -> np.ndarray:
        """Integer mode indices, shape (n_modes, dim - 1), lexicographic order."""
        r = np.arange(-self.trunc, self.trunc + 1)
        grids = np.meshgrid(*([r] * len(self.alpha)), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def lateral_wavevector(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        return np.asarray(self.alpha) + TWO_PI * n / np.asarray(self.period)

    @cached_property
    def alpha_n(self) -> np.ndarray:
        return self.lateral_wavevector(self.indices)

    @cached_property
    def beta(self) -> np.ndarray:
        return _beta_branch(self.k**2 - np.sum(self.alpha_n**2, axis=-1))

    @cached_property
    def propagating(self) -> np.ndarray:
        return np.linalg.norm(self.alpha_n, axis=-1) < self.k

    @property
    def prefactor(self) -> float:
        return 1.0 / (2.0 * self.cell_size)

    def mode_position(self, n) -> int:
        """Row of mode ``n`` in :attr:`indices`."""
        n = np.atleast_1d(n)
        side = 2 * self.trunc + 1
        pos = 0
        for nj in n:
            if abs(nj) > self.trunc:
                raise IndexError(f"mode {tuple(n)} outside truncation {self.trunc}")
            pos = pos * side + int(nj) + self.trunc
        return pos

    def with_alpha(self, alpha) -> "WaveParams":
        return WaveParams(self.k, alpha, self.period, self.trunc)


def beta_n(params: WaveParams, n) -> complex:
    """Vertical wavenumber of mode ``n`` (Im >= 0); raises at a Wood anomaly."""
    a = params.lateral_wavevector(np.atleast_1d(n))
    d = params.k**2 - float(np.sum(a**2))
    if math.sqrt(abs(d)) <= WOOD_TOL * params.k:
        raise WoodAnomaly(f"beta_n = 0 for n={tuple(np.atleast_1d(n))}")
    return complex(_beta_branch(d))


def greens_free(k: float, x, y, dim: int | None = None):
    """Outgoing free-space fundamental solution.

    ``exp(i k r) / (4 pi r)`` in 3D and ``(i/4) H0(k r)`` in 2D; solves
    ``(Delta + k^2) u = -delta``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dim = dim or x.shape[-1]
    r = np.linalg.norm(x - y, axis=-1)
    if np.any(r < 1e-14):
        raise CoincidentPoints("greens_free evaluated at coincident points")
    if dim == 3:
        return np.exp(1j * k * r) / (4 * np.pi * r)
    if dim == 2:
        return 0.25j * special.hankel1(0, k * r)
    raise ValueError("dim must be 2 or 3")


def _split(params: WaveParams, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != params.dim or y.shape[-1] != params.dim:
        raise ValueError(f"points must have {params.dim} coordinates")
    lat = x[..., :-1] - y[..., :-1]
    dz = x[..., -1] - y[..., -1]
    if np.any(np.abs(dz) < params.sep_tol):
        raise VerticalCoincidence(
            f"|x_last - y_last| < {params.sep_tol:g}; the spectral series needs vertical separation")
    return lat, dz


def _terms(params: WaveParams, lat, dz):
    # shape (..., n_modes)
    phase = np.tensordot(lat, params.alpha_n, axes=([-1], [-1]))
    return np.exp(1j * phase + 1j * params.beta * np.abs(dz)[..., None]) / (1j * params.beta)


def greens_qp(params: WaveParams, x, y):
    """Truncated spectral alpha-quasi-periodic Green function ``G(x, y)``.

    Vectorised over leading axes of ``x`` and ``y`` (broadcast together).
    Requires ``|x_last - y_last| >= params.sep_tol``.
    """
    lat, dz = _split(params, x, y)
    return params.prefactor * np.sum(_terms(params, lat, dz), axis=-1)


def greens_qp_grad(params: WaveParams, x, y):
    """Gradient of :func:`greens_qp` with respect to ``x``; last axis is the component."""
    lat, dz = _split(params, x, y)
    t = _terms(params, lat, dz)
    comps = [np.sum(t * (1j * params.alpha_n[:, j]), axis=-1) for j in range(params.dim - 1)]
    comps.append(np.sum(t * (1j * params.beta) * np.sign(dz)[..., None], axis=-1))
    return params.prefactor * np.stack(comps, axis=-1)


def mode_split(params: WaveParams, x, y):
    """Upward/downward propagating parts of ``G(x, y) - conj(G(y, x))``.

    For ``y`` on a plane above ``x`` returns ``(Delta_U, Delta_D)`` with

        Delta_U = c sum_{|alpha_n| <= k} 1/(i beta_n) exp(i alpha_n.(x'-y') - i beta_n (y3 - x3))
        Delta_D = c sum_{|alpha_n| <= k} 1/(i beta_n) exp(i alpha_n.(x'-y') + i beta_n (y3 - x3))

    Evanescent terms cancel exactly between the two Green functions.
    """
    lat, dz = _split(params, x, y)
    h = -dz  # y3 - x3
    if np.any(h <= 0):
        raise ValueError("mode_split requires y strictly above x")
    prop = np.linalg.norm(params.alpha_n, axis=-1) <= params.k
    a = params.alpha_n[prop]
    b = params.beta[prop]
    phase = np.exp(1j * np.tensordot(lat, a, axes=([-1], [-1])))
    up = np.exp(-1j * b * h[..., None])
    c = params.prefactor / (1j * b)
    return np.sum(c * phase * up, axis=-1), np.sum(c * phase / up, axis=-1)


def wood_scan(params: WaveParams) -> list[ModeIndex]:
    """Modes within the truncation box with ``|beta_n| < WOOD_TOL * k``, sorted by ``|beta_n|``."""
    k2 = params.k**2
    a2 = np.sum(params.alpha_n**2, axis=-1)
    mag = np.sqrt(np.abs(k2 - a2))
    hits = np.nonzero(mag <= WOOD_TOL * params.k)[0]
    hits = hits[np.argsort(mag[hits], kind="stable")]
    out = []
    for i in hits:
        out.append(ModeIndex(
            n=tuple(int(v) for v in params.indices[i]),
            alpha_n=tuple(float(v) for v in params.alpha_n[i]),
            beta_n=complex(_beta_branch(k2 - a2[i])),
            propagating=bool(np.sqrt(a2[i]) < params.k),
        ))
    return out


def mode_table(params: WaveParams) -> list[ModeIndex]:
    return [ModeIndex(tuple(int(v) for v in n), tuple(float(v) for v in a), complex(b), bool(p))
            for n, a, b, p in zip(params.indices, params.alpha_n, params.beta, params.propagating)]
