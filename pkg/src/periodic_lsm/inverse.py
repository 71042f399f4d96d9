"""Linear sampling for gratings: near-field matrix, Tikhonov/Morozov solves, indicator sweep.

Matrix convention: the density-to-data map ``F`` is antilinear in the
density (the incident field conjugates it), so the stored matrix ``A``
satisfies ``F(g) = A conj(g)`` and column ``j`` of ``A`` is the near-field
trace produced by the unit density ``e_j``.  The near-field equation
``F g = r`` is solved as ``A h = r`` with ``g = conj(h)``; the two have the
same norm, so the indicator ``||g||`` is unaffected.
"""
from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .errors import (DiscrepancyUnsolvable, EvaluationAboveSources, InsufficientSampling,
                     MatrixFormatError, NoCrossing, NonpositiveAlpha)
from .forward import ForwardSolver, near_trace, receiver_nodes, scattered_for_density
from .geometry import content_hash
from .greens import WaveParams

A_FLOOR_REL = 1e-10
BRACKET = (1e-16, 1e8)
STANDOFF = 0.05
DEFAULT_LEVEL = 0.5


def _fmt(v) -> str:
    return format(float(v), ".17g")


@dataclass(frozen=True, eq=False)
class NearFieldMatrix:
    """Discrete near-field operator (stored-linear convention) with its SVD.

    ``noise`` is the relative Frobenius noise level ``delta`` already added
    to ``entries``; ``meta`` records provenance (profile hash and friends).
    """

    entries: np.ndarray
    k: float
    alpha: float
    b: float
    period: float = 2 * np.pi
    trunc: int = 0
    noise: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        A = np.array(self.entries, dtype=complex)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("near-field matrix must be square")
        A.setflags(write=False)
        object.__setattr__(self, "entries", A)
        U, s, Vh = np.linalg.svd(A)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "Vh", Vh)

    @property
    def M(self) -> int:
        return self.entries.shape[0]

    @property
    def params(self) -> WaveParams:
        return WaveParams(self.k, self.alpha, self.period, self.trunc)

    def apply(self, g):
        """``F(g) = A conj(g)``."""
        return self.entries @ np.conj(g)

    def to_csv(self) -> str:
        buf = io.StringIO()
        head = {"k": _fmt(self.k), "alpha": _fmt(self.alpha), "b": _fmt(self.b), "M": self.M,
                "period": _fmt(self.period), "trunc": self.trunc, "noise": _fmt(self.noise)}
        head.update({key: self.meta[key] for key in sorted(self.meta)})
        for key, val in head.items():
            buf.write(f"#{key}={val}\n")
        buf.write("re,im\n")
        for v in self.entries.ravel():
            buf.write(f"{_fmt(v.real)},{_fmt(v.imag)}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "NearFieldMatrix":
        head: dict = {}
        vals = []
        seen_header = False
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            if line.startswith("#"):
                key, sep, val = line[1:].partition("=")
                if not sep:
                    raise MatrixFormatError(f"line {lineno}: malformed header {line!r}")
                head[key.strip()] = val.strip()
                continue
            if not seen_header:
                if line.strip() != "re,im":
                    raise MatrixFormatError(f"line {lineno}: expected column header 're,im'")
                seen_header = True
                continue
            parts = line.split(",")
            try:
                if len(parts) != 2:
                    raise ValueError
                v = complex(float(parts[0]), float(parts[1]))
            except ValueError:
                raise MatrixFormatError(f"line {lineno}: expected 're,im' numbers, got {line!r}") from None
            if not np.isfinite(v):
                raise MatrixFormatError(f"line {lineno}: non-finite entry")
            vals.append(v)
        missing = [key for key in ("k", "alpha", "b", "M", "period", "trunc", "noise") if key not in head]
        if missing:
            raise MatrixFormatError(f"missing header keys: {', '.join(missing)}")
        try:
            M = int(head["M"])
            numeric = {key: float(head[key]) for key in ("k", "alpha", "b", "period", "noise")}
            trunc = int(head["trunc"])
        except ValueError as exc:
            raise MatrixFormatError(f"bad header value: {exc}") from None
        if len(vals) != M * M:
            raise MatrixFormatError(f"expected {M * M} entries for M={M}, found {len(vals)}")
        meta = {key: v for key, v in head.items()
                if key not in ("k", "alpha", "b", "M", "period", "trunc", "noise")}
        return cls(np.array(vals).reshape(M, M), numeric["k"], numeric["alpha"], numeric["b"],
                   numeric["period"], trunc, numeric["noise"], meta)


def _matrix_meta(solver: ForwardSolver) -> dict:
    return {"profile_hash": content_hash(solver.profile, solver.dissection),
            "n_nodes": solver.mesh.n}


def build_matrix(solver: ForwardSolver, M: int | None = None) -> NearFieldMatrix:
    """All ``M`` columns at once: one multi-right-hand-side solve."""
    p = solver.params
    M = M or 2 * p.trunc + 1
    if M < 2 * p.trunc + 1:
        raise InsufficientSampling(f"M={M} below 2*trunc+1={2 * p.trunc + 1}")
    A = near_trace(scattered_for_density(solver, np.eye(M)), M)
    return NearFieldMatrix(A, p.k, p.alpha[0], solver.b, p.period[0], p.trunc, 0.0, _matrix_meta(solver))


def build_matrix_columnwise(solver: ForwardSolver, M: int | None = None) -> NearFieldMatrix:
    """Reference assembly: one forward synthesis per unit density."""
    p = solver.params
    M = M or 2 * p.trunc + 1
    if M < 2 * p.trunc + 1:
        raise InsufficientSampling(f"M={M} below 2*trunc+1={2 * p.trunc + 1}")
    cols = []
    for j in range(M):
        e = np.zeros(M, dtype=complex)
        e[j] = 1.0
        cols.append(near_trace(scattered_for_density(solver, e), M))
    return NearFieldMatrix(np.stack(cols, axis=1), p.k, p.alpha[0], solver.b, p.period[0], p.trunc,
                           0.0, _matrix_meta(solver))


def add_noise(matrix: NearFieldMatrix, delta: float, seed: int) -> NearFieldMatrix:
    """Complex Gaussian perturbation rescaled to ``||N||_F = delta ||F||_F`` exactly."""
    if delta < 0:
        raise ValueError("noise level must be >= 0")
    if delta == 0:
        return replace(matrix, noise=0.0)
    rng = np.random.default_rng(seed)
    shape = matrix.entries.shape
    N = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    N *= delta * np.linalg.norm(matrix.entries) / np.linalg.norm(N)
    return replace(matrix, entries=matrix.entries + N, noise=float(delta))


def frobenius_ratio(noisy: NearFieldMatrix, clean: NearFieldMatrix) -> float:
    return float(np.linalg.norm(noisy.entries - clean.entries) / np.linalg.norm(clean.entries))


def _rhs_coeffs(params: WaveParams, b: float, z):
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if np.any(z[:, 1] > b - params.sep_tol):
        raise EvaluationAboveSources("sampling point must lie below the measurement line")
    an = params.alpha_n[:, 0]
    amp = params.prefactor / (1j * params.beta)
    return amp[:, None] * np.exp(-1j * np.outer(an, z[:, 0]) + 1j * np.outer(params.beta, b - z[:, 1]))


def rhs_matrix(params: WaveParams, b: float, M: int, z):
    """Columns ``G(x_m, z)`` for each sampling point in ``z`` (shape ``(npts, 2)``)."""
    x = receiver_nodes(params, b, M)
    P = np.exp(1j * np.outer(x[:, 0], params.alpha_n[:, 0]))
    return P @ _rhs_coeffs(params, b, z)


def rhs_for_point(params: WaveParams, b: float, M: int, z):
    """Near-field equation right-hand side: ``G(x_m, z)`` at the ``M`` receivers."""
    return rhs_matrix(params, b, M, np.asarray(z, dtype=float)[None, :])[:, 0]


def _spectral_residual(s, beta, perp2, a):
    return np.sqrt(np.sum((a / (s**2 + a)) ** 2 * np.abs(beta) ** 2) + perp2)


def tikhonov_solve(matrix: NearFieldMatrix, rhs, a: float):
    """Regularized density for ``F g = rhs``; returns ``(g, ||F g - rhs||)``."""
    if not a > 0:
        raise NonpositiveAlpha(f"Tikhonov parameter must be > 0, got {a}")
    rhs = np.asarray(rhs, dtype=complex)
    beta = matrix.U.conj().T @ rhs
    h = matrix.Vh.conj().T @ (matrix.s / (matrix.s**2 + a) * beta)
    g = np.conj(h)
    return g, float(np.linalg.norm(matrix.apply(g) - rhs))


def morozov_alpha(matrix: NearFieldMatrix, rhs, delta: float | None = None) -> float:
    """Root of ``||F g_a - rhs|| = delta ||rhs||`` (monotone in ``a``), searched in log ``a``."""
    delta = matrix.noise if delta is None else delta
    if not delta > 0:
        raise DiscrepancyUnsolvable("discrepancy principle needs a positive noise level")
    rhs = np.asarray(rhs, dtype=complex)
    s = matrix.s
    beta = matrix.U.conj().T @ rhs
    nr = np.linalg.norm(rhs)
    perp2 = max(nr**2 - np.linalg.norm(beta) ** 2, 0.0)
    target = delta * nr
    smax2 = max(s[0] ** 2, 1e-300)

    def disc(loga):
        return _spectral_residual(s, beta, perp2, np.exp(loga)) - target

    lo, hi = np.log(BRACKET[0] * smax2), np.log(BRACKET[1] * smax2)
    flo, fhi = disc(lo), disc(hi)
    if not (flo < 0 < fhi):
        raise DiscrepancyUnsolvable(
            f"discrepancy {flo + target:.3e}..{fhi + target:.3e} does not bracket {target:.3e}")
    root = optimize.brentq(disc, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=200)
    return float(np.exp(root))


@dataclass(frozen=True)
class Region:
    """Sampling box ``z1_lo < z1 < z1_hi``, ``z2_lo < z2 < z2_hi`` (cell centres are sampled)."""

    z1_lo: float
    z1_hi: float
    z2_lo: float
    z2_hi: float

    def __post_init__(self):
        if not (self.z1_hi > self.z1_lo and self.z2_hi > self.z2_lo):
            raise ValueError("empty sampling region")

    def axes(self, resolution):
        n1, n2 = resolution
        if n1 < 1 or n2 < 1:
            raise ValueError("resolution must be >= 1 in each direction")
        z1 = self.z1_lo + (np.arange(n1) + 0.5) * (self.z1_hi - self.z1_lo) / n1
        z2 = self.z2_lo + (np.arange(n2) + 0.5) * (self.z2_hi - self.z2_lo) / n2
        return z1, z2


def default_region(matrix: NearFieldMatrix, z2_lo: float = 0.1) -> Region:
    return Region(0.0, matrix.period, z2_lo, matrix.b - STANDOFF)


@dataclass(frozen=True, eq=False)
class IndicatorGrid:
    """Indicator samples; arrays are indexed ``[i2, i1]`` (depth, lateral).

    ``flag`` is ``"ok"`` (Morozov root), ``"floor"`` (noiseless data, fixed
    floor parameter) or ``"unsolvable"`` (no discrepancy root; floor used).
    ``discrepancy`` is the achieved ``||F g - rhs|| / ||rhs||``.
    """

    z1: np.ndarray
    z2: np.ndarray
    indicator: np.ndarray
    alpha_used: np.ndarray
    discrepancy: np.ndarray
    flag: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("z1,z2,indicator,alpha_used,discrepancy,flag\n")
        for i2, z2 in enumerate(self.z2):
            for i1, z1 in enumerate(self.z1):
                buf.write(",".join([_fmt(z1), _fmt(z2), _fmt(self.indicator[i2, i1]),
                                    _fmt(self.alpha_used[i2, i1]), _fmt(self.discrepancy[i2, i1]),
                                    str(self.flag[i2, i1])]) + "\n")
        return buf.getvalue()


def _solve_point(matrix: NearFieldMatrix, rhs, a_floor: float):
    if matrix.noise > 0:
        try:
            a, flag = morozov_alpha(matrix, rhs), "ok"
        except DiscrepancyUnsolvable:
            a, flag = a_floor, "unsolvable"
    else:
        a, flag = a_floor, "floor"
    g, res = tikhonov_solve(matrix, rhs, a)
    return float(np.linalg.norm(g)), a, res / max(np.linalg.norm(rhs), 1e-300), flag


def indicator_grid(matrix: NearFieldMatrix, region: Region | None = None, resolution=(64, 64),
                   threads: int = 1) -> IndicatorGrid:
    """Sweep ``z -> ||g_z||`` over the cell centres of ``region``.

    Points are independent; ``threads > 1`` distributes rows over a thread
    pool without changing any result.
    """
    region = region or default_region(matrix)
    p = matrix.params
    if region.z2_hi > matrix.b - p.sep_tol:
        raise EvaluationAboveSources("sampling region must stay below the measurement line")
    z1, z2 = region.axes(resolution)
    a_floor = A_FLOOR_REL * max(matrix.s[0] ** 2, 1e-300)
    shape = (len(z2), len(z1))
    ind = np.empty(shape)
    alp = np.empty(shape)
    dis = np.empty(shape)
    flag = np.empty(shape, dtype=object)

    def row(i2):
        z = np.stack([z1, np.full(len(z1), z2[i2])], axis=1)
        R = rhs_matrix(p, matrix.b, matrix.M, z)
        for i1 in range(len(z1)):
            ind[i2, i1], alp[i2, i1], dis[i2, i1], flag[i2, i1] = _solve_point(matrix, R[:, i1], a_floor)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(row, range(len(z2))))
    else:
        for i2 in range(len(z2)):
            row(i2)
    return IndicatorGrid(z1, z2, ind, alp, dis, flag)


@dataclass(frozen=True, eq=False)
class SurfaceEstimate:
    """Estimated profile heights per grid column (NaN where no crossing was found)."""

    t: np.ndarray
    f_est: np.ndarray
    level: float

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.f_est)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,f_est\n")
        for t, f in zip(self.t, self.f_est):
            buf.write(f"{_fmt(t)},{'nan' if np.isnan(f) else _fmt(f)}\n")
        return buf.getvalue()

    def max_error(self, profile) -> float:
        """Max vertical deviation from ``profile``; infinite if any column is missing."""
        if np.any(self.missing):
            return float("inf")
        return float(np.max(np.abs(self.f_est - profile.f(self.t))))


def column_crossing(z2, values, level: float = DEFAULT_LEVEL) -> float:
    """Lowest upward crossing of ``min + level (max - min)`` by ``log values`` along ``z2``."""
    L = np.log(np.asarray(values, dtype=float))
    lo, hi = L.min(), L.max()
    thr = lo + level * (hi - lo)
    if not hi > lo:
        raise NoCrossing("flat column")
    for i in range(len(L) - 1):
        if L[i] < thr <= L[i + 1]:
            return float(z2[i] + (thr - L[i]) / (L[i + 1] - L[i]) * (z2[i + 1] - z2[i]))
    raise NoCrossing("indicator never rises through the threshold")


def extract_surface(grid: IndicatorGrid, level: float = DEFAULT_LEVEL) -> SurfaceEstimate:
    """Per-column threshold estimate of the profile from the indicator field."""
    est = np.full(len(grid.z1), np.nan)
    for i1 in range(len(grid.z1)):
        try:
            est[i1] = column_crossing(grid.z2, grid.indicator[:, i1], level)
        except NoCrossing:
            pass
    return SurfaceEstimate(grid.z1.copy(), est, level)
