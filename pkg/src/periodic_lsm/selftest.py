"""Invariant suite for the Green-function and Rayleigh kernels.

Every check draws randomized admissible configurations (no Wood anomaly,
vertical separation >= 0.5) from a seeded generator and reports the worst
residual against its tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import greens
from ._qpkernel import QPKernel
from .errors import WoodAnomaly
from .rayleigh import RayleighSeq, divergence_residual, evaluate, grid_nodes, project, sobolev_norm


@dataclass(frozen=True)
class Check:
    name: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= self.tol)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name:<26} residual={self.residual:.3e} tol={self.tol:.1e}"


def random_params(rng, dim: int) -> greens.WaveParams:
    while True:
        k = rng.uniform(0.3, 3.0)
        alpha = tuple(rng.uniform(-0.5, 0.5, dim - 1))
        try:
            return greens.WaveParams(k, alpha)
        except WoodAnomaly:
            continue


def random_pair(rng, dim: int):
    x = rng.uniform(0, 2 * np.pi, dim)
    y = rng.uniform(0, 2 * np.pi, dim)
    x[-1] = rng.uniform(0.0, 1.0)
    y[-1] = x[-1] + rng.choice([-1, 1]) * rng.uniform(0.5, 2.0)
    return x, y


def check_beta_branch(rng, n: int) -> Check:
    worst = 0.0
    for i in range(n):
        p = random_params(rng, 2 + i % 2)
        b = p.beta
        d = p.k**2 - np.sum(p.alpha_n**2, axis=-1)
        # Im >= 0, propagating modes real positive, b^2 = k^2 - |alpha_n|^2
        bad = np.maximum(-b.imag, 0) + np.where(d > 0, np.maximum(-b.real, 0) + np.abs(b.imag), np.abs(b.real))
        worst = max(worst, float(np.max(bad)), float(np.max(np.abs(b**2 - d) / np.maximum(np.abs(d), 1))))
    return Check("beta_branch", worst, 1e-12)


def check_quasi_periodicity(rng, n: int) -> Check:
    worst = 0.0
    for i in range(n):
        dim = 2 + i % 2
        p = random_params(rng, dim)
        x, y = random_pair(rng, dim)
        shift = np.zeros(dim)
        ax = rng.integers(dim - 1)
        shift[ax] = p.period[ax]
        g = greens.greens_qp(p, x, y)
        gs = greens.greens_qp(p, x + shift, y)
        worst = max(worst, abs(gs - np.exp(1j * p.alpha[ax] * p.period[ax]) * g) / max(1.0, abs(g)))
    return Check("quasi_periodicity", worst, 1e-10)


def check_reciprocity(rng, n: int) -> Check:
    worst = 0.0
    for i in range(n):
        dim = 2 + i % 2
        p = random_params(rng, dim)
        q = greens.WaveParams(p.k, tuple(-a for a in p.alpha), p.period, p.trunc)
        x, y = random_pair(rng, dim)
        a, b = greens.greens_qp(p, x, y), greens.greens_qp(q, y, x)
        worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    return Check("reciprocity", worst, 1e-12)


def check_mode_split(rng, n: int) -> Check:
    worst = 0.0
    for i in range(n):
        dim = 2 + i % 2
        p = random_params(rng, dim)
        x, y = random_pair(rng, dim)
        if y[-1] < x[-1]:
            x, y = y, x
        up, down = greens.mode_split(p, x, y)
        rhs = greens.greens_qp(p, x, y) - np.conj(greens.greens_qp(p, y, x))
        worst = max(worst, abs(up + down - rhs) / max(1.0, abs(rhs)))
    return Check("mode_split_identity", worst, 1e-12)


def check_helmholtz_fd(rng, n: int, step: float = 1e-3) -> Check:
    worst = 0.0
    for i in range(n):
        dim = 2 + i % 2
        p = random_params(rng, dim)
        x, y = random_pair(rng, dim)
        g = greens.greens_qp(p, x, y)
        lap = 0.0
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = step
            lap += greens.greens_qp(p, x + e, y) - 2 * g + greens.greens_qp(p, x - e, y)
        res = abs(lap / step**2 + p.k**2 * g)
        worst = max(worst, res / abs(g))
    return Check("helmholtz_fd", worst, 1e-4)


def check_spectral_vs_ewald(rng, n: int) -> Check:
    """2D spectral series against the independent Ewald-split lattice sum."""
    worst = 0.0
    for _ in range(n):
        p = random_params(rng, 2)
        kern = QPKernel(p.k, p.alpha[0], p.period[0])
        x, y = random_pair(rng, 2)
        y[-1] = x[-1] + np.sign(y[-1] - x[-1]) * max(abs(y[-1] - x[-1]), 1.0)
        spec = greens.greens_qp(p, x, y)
        ew = kern.evaluate(x[0] - y[0], x[1] - y[1])
        worst = max(worst, abs(spec + ew) / max(1.0, abs(spec)))
    return Check("spectral_vs_ewald", worst, 1e-10)


def _random_seq(rng, p, vector=False):
    shape = (len(p.indices), p.dim) if vector else (len(p.indices),)
    return RayleighSeq(p, rng.standard_normal(shape) + 1j * rng.standard_normal(shape), 1.5)


def check_rayleigh_roundtrip(rng, n: int) -> Check:
    worst = 0.0
    for i in range(n):
        dim = 2 + i % 2
        p = greens.WaveParams(random_params(rng, dim).k, random_params(rng, dim).alpha, trunc=int(rng.integers(2, 8)))
        seq = _random_seq(rng, p)
        M = 2 * p.trunc + 1 + int(rng.integers(0, 3))
        nodes = list(np.meshgrid(*grid_nodes(p, (M,) * (dim - 1)), indexing="ij"))
        pts = np.stack(nodes + [np.full(nodes[0].shape, seq.reference_height)], axis=-1)
        back = project(p, evaluate(seq, pts), seq.reference_height)
        worst = max(worst, float(np.max(np.abs(back.coeffs - seq.coeffs))))
    return Check("rayleigh_roundtrip", worst, 1e-12)


def check_parseval(rng, n: int) -> Check:
    worst = 0.0
    for _ in range(n):
        p = greens.WaveParams(1.3, rng.uniform(-0.5, 0.5), trunc=int(rng.integers(2, 10)))
        seq = _random_seq(rng, p)
        M = 2 * p.trunc + 1
        x = grid_nodes(p, (M,))[0]
        samples = evaluate(seq, np.stack([x, np.full(M, seq.reference_height)], axis=1))
        l2 = np.sqrt(np.mean(np.abs(samples) ** 2))
        worst = max(worst, abs(sobolev_norm(seq, 0.0) - l2) / l2)
    return Check("parseval", worst, 1e-12)


def check_divergence(rng, n: int) -> Check:
    worst = 0.0
    for _ in range(n):
        p = random_params(rng, 3)
        p = greens.WaveParams(p.k, p.alpha, trunc=4)
        kap = np.concatenate([p.alpha_n, p.beta[:, None]], axis=1)
        pol = rng.standard_normal((len(kap), 3)) + 1j * rng.standard_normal((len(kap), 3))
        proj = pol - (np.sum(pol * kap, axis=1) / np.sum(kap * kap, axis=1))[:, None] * kap
        seq = RayleighSeq(p, proj * np.exp(1j * rng.uniform(0, 2 * np.pi)), 1.0)
        worst = max(worst, divergence_residual(seq))
    return Check("divergence_free", worst, 1e-13)


CHECKS = (check_beta_branch, check_quasi_periodicity, check_reciprocity, check_mode_split,
          check_helmholtz_fd, check_spectral_vs_ewald, check_rayleigh_roundtrip, check_parseval,
          check_divergence)


def run_selftest(n: int = 20, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    return [fn(rng, n) for fn in CHECKS]
