"""Truncated Rayleigh sequences on a horizontal line/plane above the grating.

A sequence stores, for every mode ``n`` with ``|n_j| <= trunc``, the complex
coefficient ``C_n`` of ``exp(i alpha_n.x' + i beta_n (x_last - b))`` where
``b`` is the reference height.  The physical Rayleigh coefficient ``E_n`` of
``exp(i alpha_n.x' + i beta_n x_last)`` is ``C_n exp(-i beta_n b)``; storing
``C_n`` avoids overflowing ``exp(-i beta_n b)`` for strongly evanescent modes.
Vector sequences carry a trailing component axis (vertical component last).
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSampling, NotTangential
from .greens import WaveParams

DIV_TOL = 1e-10
FLOOR = 1e-300


@dataclass(frozen=True)
class RayleighSeq:
    params: WaveParams
    coeffs: np.ndarray
    reference_height: float

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape[0] != len(self.params.indices):
            raise ValueError(f"expected {len(self.params.indices)} modes, got {c.shape[0]}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def is_vector(self) -> bool:
        return self.coeffs.ndim == 2

    def coeff(self, n):
        return self.coeffs[self.params.mode_position(n)]

    def physical(self) -> np.ndarray:
        """Coefficients of ``exp(i alpha_n.x' + i beta_n x_last)`` (may overflow for large b)."""
        f = np.exp(-1j * self.params.beta * self.reference_height)
        return self.coeffs * (f[:, None] if self.is_vector else f)

    def _check(self, other):
        if other.params != self.params or other.reference_height != self.reference_height:
            raise ValueError("sequences live on different mode sets or heights")

    def __add__(self, other: "RayleighSeq") -> "RayleighSeq":
        self._check(other)
        return RayleighSeq(self.params, self.coeffs + other.coeffs, self.reference_height)

    def __sub__(self, other: "RayleighSeq") -> "RayleighSeq":
        self._check(other)
        return RayleighSeq(self.params, self.coeffs - other.coeffs, self.reference_height)

    def __mul__(self, c: complex) -> "RayleighSeq":
        return RayleighSeq(self.params, self.coeffs * c, self.reference_height)

    __rmul__ = __mul__

    def at_height(self, b: float) -> "RayleighSeq":
        """Re-anchor at height ``b`` (upward continuation when ``b`` is larger)."""
        f = np.exp(1j * self.params.beta * (b - self.reference_height))
        return RayleighSeq(self.params, self.coeffs * (f[:, None] if self.is_vector else f), b)


def grid_nodes(params: WaveParams, shape) -> list[np.ndarray]:
    """Uniform lateral sample coordinates ``x_j = j * period / M`` per axis."""
    return [np.arange(m) * p / m for m, p in zip(shape, params.period)]


def project(params: WaveParams, samples, reference_height: float) -> RayleighSeq:
    """Rayleigh coefficients from samples of an alpha-quasi-periodic field on ``x_last = b``.

    ``samples`` has one axis per lateral direction (uniform grid starting at 0,
    see :func:`grid_nodes`), optionally followed by a vector-component axis.
    """
    s = np.asarray(samples, dtype=complex)
    nlat = params.dim - 1
    shape = s.shape[:nlat]
    if len(shape) != nlat:
        raise ValueError(f"samples need {nlat} lateral axes")
    if any(m < 2 * params.trunc + 1 for m in shape):
        raise InsufficientSampling(
            f"grid {shape} too coarse for trunc={params.trunc}; need {2 * params.trunc + 1} per axis")
    nodes = grid_nodes(params, shape)
    demod = np.ones(shape, dtype=complex)
    for ax, (x, a) in enumerate(zip(nodes, params.alpha)):
        sh = [1] * nlat
        sh[ax] = -1
        demod = demod * np.exp(-1j * a * x).reshape(sh)
    if s.ndim > nlat:
        demod = demod[..., None]
    spec = np.fft.fftn(s * demod, axes=tuple(range(nlat))) / np.prod(shape)
    idx = tuple((params.indices[:, j] % shape[j]) for j in range(nlat))
    return RayleighSeq(params, spec[idx], float(reference_height))


def evaluate(seq: RayleighSeq, x):
    """Evaluate the truncated Rayleigh series at points ``x`` (last axis = coordinates).

    Valid for ``x_last >= reference_height`` above the grating; below that the
    sum is an extrapolation.
    """
    x = np.asarray(x, dtype=float)
    p = seq.params
    phase = np.tensordot(x[..., :-1], p.alpha_n, axes=([-1], [-1]))
    phase = phase + p.beta * (x[..., -1:] - seq.reference_height)
    e = np.exp(1j * phase)
    if seq.is_vector:
        return np.tensordot(e, seq.coeffs, axes=([-1], [0]))
    return e @ seq.coeffs


def _kappa(params: WaveParams) -> np.ndarray:
    return np.concatenate([params.alpha_n, params.beta[:, None]], axis=1)


def divergence_residual(seq: RayleighSeq) -> float:
    """max_n |alpha_n.E_n + beta_n E_n^(last)| / max(|E_n|, FLOOR)."""
    if not seq.is_vector:
        raise ValueError("divergence residual needs a vector sequence")
    c = seq.coeffs
    if c.shape[1] != seq.params.dim:
        raise ValueError("vector coefficients need one component per coordinate")
    num = np.abs(np.sum(_kappa(seq.params) * c, axis=1))
    den = np.maximum(np.linalg.norm(c, axis=1), FLOOR)
    return float(np.max(num / den))


def efficiencies(seq: RayleighSeq, incident_beta: float):
    """Diffraction efficiencies ``(beta_n / beta) |R_n|^2`` of propagating modes.

    ``seq`` must hold the scattered field of a unit-amplitude plane wave whose
    vertical wavenumber is ``incident_beta``.  Returns ``(dict n -> e_n, total)``.
    """
    if seq.is_vector:
        raise ValueError("efficiencies are defined for scalar sequences")
    p = seq.params
    out = {}
    for i in np.nonzero(p.propagating)[0]:
        n = tuple(int(v) for v in p.indices[i])
        out[n] = float(p.beta[i].real / incident_beta * abs(seq.coeffs[i]) ** 2)
    return out, float(sum(out.values()))


def sobolev_norm(seq: RayleighSeq, s: float, variant: str = "plain") -> float:
    """Truncated sequence norm ``(sum (1+|alpha_n|^2)^s w_n)^(1/2)``.

    ``w_n = |E_n|^2`` (plain), plus ``|E_n.alpha_n|^2`` (div) or
    ``|E_n x alpha_n|^2`` (curl).  The div/curl variants need tangential
    vector data (vanishing last component).  Coefficients are taken as stored.
    """
    p = seq.params
    weight = (1.0 + np.sum(p.alpha_n**2, axis=1)) ** s
    c = seq.coeffs
    if variant == "plain":
        w = np.sum(np.abs(c) ** 2, axis=1) if seq.is_vector else np.abs(c) ** 2
    elif variant in ("div", "curl"):
        if not seq.is_vector or c.shape[1] != p.dim:
            raise NotTangential(f"{variant} norm needs vector coefficients with {p.dim} components")
        mag = np.linalg.norm(c, axis=1)
        if np.any(np.abs(c[:, -1]) > 1e-12 * np.maximum(mag, FLOOR)):
            raise NotTangential("vertical component is nonzero")
        a = np.concatenate([p.alpha_n, np.zeros((len(p.alpha_n), 1))], axis=1)
        if variant == "div":
            extra = np.abs(np.sum(c * a, axis=1)) ** 2
        else:
            if p.dim != 3:
                raise NotTangential("curl norm is defined for 3-vectors")
            extra = np.sum(np.abs(np.cross(c, a)) ** 2, axis=1)
        w = np.sum(np.abs(c) ** 2, axis=1) + extra
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return float(np.sqrt(np.sum(weight * w)))


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def to_csv(seq: RayleighSeq) -> str:
    """Serialise as CSV.

    Layout: ``#``-prefixed metadata lines, then per vector component a line
    ``# component=j`` (scalar sequences have a single block without it),
    a header ``n1[,n2],re,im`` and one row per mode in index order.
    """
    p = seq.params
    buf = io.StringIO()
    buf.write(f"# k={_fmt(p.k)}\n")
    buf.write("# alpha=" + ";".join(_fmt(a) for a in p.alpha) + "\n")
    buf.write("# period=" + ";".join(_fmt(a) for a in p.period) + "\n")
    buf.write(f"# trunc={p.trunc}\n")
    buf.write(f"# reference_height={_fmt(seq.reference_height)}\n")
    cols = [f"n{j + 1}" for j in range(p.dim - 1)]
    blocks = [seq.coeffs] if not seq.is_vector else [seq.coeffs[:, j] for j in range(seq.coeffs.shape[1])]
    for j, block in enumerate(blocks):
        if seq.is_vector:
            buf.write(f"# component={j}\n")
        buf.write(",".join(cols + ["re", "im"]) + "\n")
        for n, c in zip(p.indices, block):
            buf.write(",".join([str(int(v)) for v in n] + [_fmt(c.real), _fmt(c.imag)]) + "\n")
    return buf.getvalue()


def from_csv(text: str) -> RayleighSeq:
    meta = {}
    blocks: list[list[complex]] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            if key == "component":
                blocks.append([])
            else:
                meta[key] = val
            continue
        if line.startswith("n1"):
            if not blocks or blocks[-1]:
                blocks.append([])
            continue
        parts = line.split(",")
        blocks[-1].append(complex(float(parts[-2]), float(parts[-1])))
    params = WaveParams(float(meta["k"]), tuple(float(v) for v in meta["alpha"].split(";")),
                        tuple(float(v) for v in meta["period"].split(";")), int(meta["trunc"]))
    blocks = [b for b in blocks if b]
    coeffs = np.array(blocks[0]) if len(blocks) == 1 else np.stack([np.array(b) for b in blocks], axis=1)
    return RayleighSeq(params, coeffs, float(meta["reference_height"]))
