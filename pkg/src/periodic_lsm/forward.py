"""Nystrom boundary-integral solver for the 2D scalar grating problem.

The scattered field solves ``Delta u + k^2 u = 0`` above the graph ``x2 = f(x1)``,
is alpha-quasi-periodic and radiating, and satisfies

    u = h1                      on Gamma_D
    du/dnu + i lam u = h2       on Gamma_I

with ``nu`` the upward unit normal.  It is represented as a single-layer
potential ``u = S phi`` with the quasi-periodic outgoing kernel ``K``
(``(Delta + k^2) K = -delta``, equal to ``-greens.greens_qp``).  The graph
geometry gives uniqueness for the Dirichlet problem on both sides of the
curve, so ``S`` is injective at every frequency and no combined-field
coupling is needed.  Unknowns are ``psi = phi * |dx/dsigma|`` at the mesh
nodes; Dirichlet rows read ``(S psi)_i = h1_i`` and impedance rows, scaled by
the node speed ``s_i``, read

    -psi_i / 2 + s_i (K' psi + i lam S psi)_i = s_i h2_i.

Log-singular parts of ``S`` and ``K'`` use Kress's trigonometric product
quadrature in ``sigma``; the remainders use the trapezoidal rule.

Incident fields built from densities on the measurement line ``Gamma_b`` are
finite modal sums and are evaluated in closed form (:class:`ModalField`).
For a density ``g`` at the ``M`` nodes ``y_j = (j d / M, b)`` with weight
``w = d / M``:

* ``incident_from_density``: ``u_in(x; g) = sum_j w conj(g_j G(y_j, x))``,
* ``synth_downgoing``: ``u_tilde(x; g) = sum_j w conj(g_j) [G(x, y_j) - Delta_D(x, y_j)]``,
* the upgoing part ``u_up(x; g) = sum_j w conj(g_j) Delta_U(x, y_j)``,

so that ``u_in = u_tilde - u_up``.  ``u_tilde`` is physical (it decays below
``Gamma_b``) and ``u_up`` is radiating, so the scattered field of ``u_in`` is
``solve(u_tilde) + u_up``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from ._qpkernel import QPKernel
from .errors import AlphaMismatch, EvaluationAboveSources, SingularSystem
from .geometry import CurvePoints, Dissection, Profile, SurfaceMesh, classify, discretize
from .greens import WaveParams
from .rayleigh import RayleighSeq

TWO_PI = 2 * np.pi
DEFAULT_NODES = 256
B_MARGIN = 0.5
_EULER = np.euler_gamma


def default_height(profile: Profile) -> float:
    return profile.max_height() + B_MARGIN


def receiver_nodes(params: WaveParams, b: float, M: int) -> np.ndarray:
    """Uniform nodes ``(j d / M, b)``, ``j = 0..M-1``, on the measurement line."""
    d = params.period[0]
    return np.stack([np.arange(M) * d / M, np.full(M, float(b))], axis=1)


# ---------------------------------------------------------------------------
# closed-form modal fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ModalField:
    """``u(x) = sum_n c_n exp(i alpha_n x1 + i kappa_n (x2 - anchor))``.

    ``coeffs`` has one row per mode of ``params`` and an optional trailing
    column axis (one field per column).  If ``ceiling`` is set, evaluation at
    ``x2 >= ceiling - params.sep_tol`` raises :class:`EvaluationAboveSources`.
    """

    params: WaveParams
    coeffs: np.ndarray
    kappa: np.ndarray
    anchor: float
    ceiling: float | None = None

    def _phase(self, x):
        x = np.asarray(x, dtype=float)
        if self.ceiling is not None and np.any(x[..., 1] >= self.ceiling - self.params.sep_tol):
            raise EvaluationAboveSources(
                f"field built from sources on x2={self.ceiling:g} evaluated at or above them")
        an = self.params.alpha_n[:, 0]
        return np.exp(1j * (x[..., :1] * an + (x[..., 1:] - self.anchor) * self.kappa))

    def __call__(self, x):
        return self._phase(x) @ self.coeffs

    def grad(self, x):
        """Gradient, last axis = component (after any column axis)."""
        e = self._phase(x)
        gx = (e * (1j * self.params.alpha_n[:, 0])) @ self.coeffs
        gy = (e * (1j * self.kappa)) @ self.coeffs
        return np.stack([gx, gy], axis=-1)

    def traces(self, curve: CurvePoints):
        """Value and normal derivative at curve points."""
        val = self(curve.points)
        g = self.grad(curve.points)
        nu = curve.normals
        if val.ndim > 1:
            nu = nu[:, None, :]
        return val, np.sum(g * nu, axis=-1)

    def __neg__(self) -> "ModalField":
        return ModalField(self.params, -self.coeffs, self.kappa, self.anchor, self.ceiling)


def plane_wave(params: WaveParams, theta: float) -> ModalField:
    """``exp(i k x.d)`` with ``d = (cos theta, -sin theta)``; needs ``alpha = k cos theta``."""
    k = params.k
    if abs(params.alpha[0] - k * np.cos(theta)) > 1e-12 * k:
        raise AlphaMismatch(f"alpha={params.alpha[0]} but k cos(theta)={k * np.cos(theta)}")
    c = np.zeros(len(params.indices), dtype=complex)
    c[params.mode_position(0)] = 1.0
    kappa = params.beta.copy()
    kappa[params.mode_position(0)] = -k * np.sin(theta)
    return ModalField(params, c, kappa, 0.0)


def _source_sums(params: WaveParams, density, M_axis_len: int):
    """``sum_j w g_j exp(-i alpha_n y_j1)`` for each mode (and column)."""
    d = params.period[0]
    M = M_axis_len
    y1 = np.arange(M) * d / M
    E = np.exp(-1j * np.outer(params.alpha_n[:, 0], y1))
    return E @ (np.asarray(density, dtype=complex) * (d / M))


def incident_from_density(params: WaveParams, b: float, g) -> ModalField:
    """``u_in(x; g) = int_{Gamma_b} conj(g(y) G(y, x)) ds(y)`` (antilinear in ``g``)."""
    g = np.asarray(g, dtype=complex)
    s = _source_sums(params, np.conj(g), g.shape[0])
    amp = params.prefactor * np.conj(1 / (1j * params.beta))
    c = amp[:, None] * s if s.ndim > 1 else amp * s
    return ModalField(params, c, np.conj(params.beta), b, ceiling=b)


def synth_downgoing(params: WaveParams, b: float, g) -> ModalField:
    """``int conj(g(y)) [G(x, y) - Delta_D(x, y)] ds(y)``: evanescent modes only."""
    g = np.asarray(g, dtype=complex)
    s = _source_sums(params, np.conj(g), g.shape[0])
    amp = np.where(params.propagating, 0.0, params.prefactor / (1j * params.beta))
    c = amp[:, None] * s if s.ndim > 1 else amp * s
    return ModalField(params, c, -params.beta, b, ceiling=b)


def upgoing_part(params: WaveParams, b: float, g) -> ModalField:
    """``int conj(g(y)) Delta_U(x, y) ds(y)``: propagating modes travelling up."""
    g = np.asarray(g, dtype=complex)
    s = _source_sums(params, np.conj(g), g.shape[0])
    amp = np.where(params.propagating, params.prefactor / (1j * params.beta), 0.0)
    c = amp[:, None] * s if s.ndim > 1 else amp * s
    return ModalField(params, c, params.beta, b)


def incident_downgoing(params: WaveParams, b: float, g) -> ModalField:
    """``int g(y) G(x, y) ds(y)`` without conjugation; physical for ``x2 < b``."""
    g = np.asarray(g, dtype=complex)
    s = _source_sums(params, g, g.shape[0])
    amp = params.prefactor / (1j * params.beta)
    c = amp[:, None] * s if s.ndim > 1 else amp * s
    return ModalField(params, c, -params.beta, b, ceiling=b)


# ---------------------------------------------------------------------------
# layer-potential quadrature
# ---------------------------------------------------------------------------

def _cutoff(delta):
    """Smooth even cutoff: 1 for |delta| <= pi/8, 0 for |delta| >= 7 pi/8."""
    s = np.clip((np.abs(delta) - np.pi / 8) / (0.75 * np.pi), 0.0, 1.0)

    def bump(v):
        return np.where(v > 0, np.exp(-1 / np.where(v > 0, v, 1.0)), 0.0)

    a, c = bump(1 - s), bump(s)
    return a / (a + c)


def _kress_weights(delta, n: int):
    """Product weights for ``int log(4 sin^2((s - tau)/2)) f(tau) dtau`` at offsets ``delta``."""
    half = n // 2
    m = np.arange(1, half)
    out = -(TWO_PI / half) * (np.cos(delta[..., None] * m) / m).sum(axis=-1)
    return out - (np.pi / half**2) * np.cos(half * delta)


class ForwardSolver:
    """Assembled and LU-factorized Nystrom system for one grating.

    Immutable after construction; solves may run from several threads.

    Attributes
    ----------
    params : WaveParams
    mesh : SurfaceMesh
    b : float
        Height of the measurement line ``Gamma_b``.
    matrix : ndarray
        The ``n x n`` system matrix (rows tagged by ``mesh.impedance``).
    """

    def __init__(self, params: WaveParams, profile: Profile, dissection: Dissection,
                 n_nodes: int = DEFAULT_NODES, b: float | None = None):
        if params.dim != 2:
            raise ValueError("the forward solver is two-dimensional")
        if n_nodes < 64:
            raise ValueError("n_nodes must be >= 64")
        if abs(profile.period - params.period[0]) > 1e-12 * params.period[0]:
            raise ValueError("profile period differs from the wave period")
        self.params = params
        self.profile = profile
        self.dissection = dissection
        self.b = default_height(profile) if b is None else float(b)
        if self.b <= profile.max_height() + params.sep_tol:
            raise ValueError(f"b={self.b} must exceed max f={profile.max_height():g}")
        self.mesh: SurfaceMesh = discretize(profile, dissection, n_nodes)
        self.kernel = QPKernel(params.k, params.alpha[0], params.period[0])
        self._diag_rem = self.kernel.evaluate(np.zeros(1), np.zeros(1), grad=True, subtract_free=True)
        S, Kp = self.surface_operators(self.mesh.nodes)
        self._S, self._Kp = S, Kp
        imp = self.mesh.impedance
        sp = self.mesh.speed
        A = S.copy()
        if np.any(imp):
            lam = dissection.lam
            A[imp] = sp[imp, None] * (Kp[imp] + 1j * lam * S[imp])
            A[imp, np.nonzero(imp)[0]] -= 0.5
        self.matrix = A
        if not np.all(np.isfinite(A)):
            raise SingularSystem("non-finite entries in the system matrix")
        self._lu = linalg.lu_factor(A, check_finite=False)
        du = np.abs(np.diag(self._lu[0]))
        if du.min() <= 1e-14 * du.max():
            raise SingularSystem(f"LU pivot ratio {du.min() / du.max():.2e}")

    # -- operators ----------------------------------------------------------
    def surface_operators(self, targets: CurvePoints):
        """Rows of ``S`` and ``K'`` (target normal derivative) at curve points.

        Targets may coincide with nodes (diagonal limits are used) or lie
        anywhere on the curve (Nystrom interpolation).
        """
        mesh, k, d = self.mesh, self.params.k, self.params.period[0]
        alpha = self.params.alpha[0]
        h = mesh.h
        src = mesh.nodes
        dsig = targets.sigma[:, None] - src.sigma[None, :]
        wrap = np.round(dsig / TWO_PI)
        delta = dsig - TWO_PI * wrap
        coinc = np.abs(delta) < 1e-13
        dx = targets.points[:, None, 0] - src.points[None, :, 0]
        dy = targets.points[:, None, 1] - src.points[None, :, 1]
        # unwrapped source copy near the target in sigma
        ux = dx - wrap * d
        r = np.hypot(ux, dy)
        safe = np.where(coinc, 1.0, 0.0)
        K, gx, gy = self.kernel.evaluate(dx + safe, dy, grad=True)
        nux = targets.normals[:, 0:1]
        nuy = targets.normals[:, 1:2]
        dK = nux * gx + nuy * gy

        ph = np.exp(1j * alpha * wrap * d)
        chi = _cutoff(delta)
        rs = np.where(coinc, 1.0, r)
        L = np.log(np.where(coinc, 1.0, 4 * np.sin(delta / 2) ** 2))
        K1 = -(1 / (4 * np.pi)) * special.j0(k * r) * chi * ph
        Kp1 = (k / (4 * np.pi)) * special.j1(k * rs) / rs * (nux * ux + nuy * dy) * chi * ph
        Kp1 = np.where(coinc, 0.0, Kp1)
        K2 = K - K1 * L
        Kp2 = dK - Kp1 * L
        if np.any(coinc):
            rem, rgx, rgy = self._diag_rem
            ti, sj = np.nonzero(coinc)
            spd = targets.speed[ti]
            K2[ti, sj] = (0.25j - _EULER / (2 * np.pi) - np.log(k * spd / 2) / (2 * np.pi)
                          + rem[0]) * ph[ti, sj]
            Kp2[ti, sj] = (targets.curvature[ti] / (4 * np.pi)
                           + nux[ti, 0] * rgx[0] + nuy[ti, 0] * rgy[0]) * ph[ti, sj]
        R = _kress_weights(delta, mesh.n)
        return R * K1 + h * K2, R * Kp1 + h * Kp2

    # -- solves -------------------------------------------------------------
    def solve_density(self, data):
        """Layer density ``psi`` for node data (``h1`` at D nodes, ``h2`` at I nodes)."""
        data = np.asarray(data, dtype=complex)
        rhs = data.copy()
        imp = self.mesh.impedance
        sp = self.mesh.speed if rhs.ndim == 1 else self.mesh.speed[:, None]
        rhs[imp] = sp[imp] * data[imp]
        return linalg.lu_solve(self._lu, rhs, check_finite=False)

    def factorization_residual(self, probes: int = 4, seed: int = 0) -> float:
        """max |A A^-1 X - X| / max |X| for random probe columns ``X``."""
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((self.mesh.n, probes)) + 1j * rng.standard_normal((self.mesh.n, probes))
        Y = linalg.lu_solve(self._lu, X, check_finite=False)
        return float(np.max(np.abs(self.matrix @ Y - X)) / np.max(np.abs(X)))

    def boundary_data(self, field: ModalField):
        """Node data of a field: value on Gamma_D nodes, impedance trace on Gamma_I nodes."""
        val, dn = field.traces(self.mesh.nodes)
        imp = self.mesh.impedance
        data = val.copy()
        data[imp] = dn[imp] + 1j * self.dissection.lam * val[imp]
        return data

    # -- layer evaluation ---------------------------------------------------
    def layer(self, psi, x):
        """Single-layer potential ``sum_j h K(x, y_j) psi_j`` at off-surface points."""
        x = np.asarray(x, dtype=float)
        y = self.mesh.points
        K = self.kernel.evaluate(x[..., None, 0] - y[:, 0], x[..., None, 1] - y[:, 1])
        return (self.mesh.h * K) @ psi

    def layer_grad(self, psi, x):
        x = np.asarray(x, dtype=float)
        y = self.mesh.points
        _, gx, gy = self.kernel.evaluate(x[..., None, 0] - y[:, 0], x[..., None, 1] - y[:, 1], grad=True)
        return np.stack([(self.mesh.h * gx) @ psi, (self.mesh.h * gy) @ psi], axis=-1)

    def layer_modes(self, psi, reference_height: float):
        """Exact Rayleigh coefficients (anchored at ``reference_height``) of the layer potential."""
        p = self.params
        y = self.mesh.points
        if reference_height <= self.profile.max_height():
            raise ValueError("reference height must lie above the grating")
        E = np.exp(-1j * np.outer(p.alpha_n[:, 0], y[:, 0])
                   + 1j * np.outer(p.beta, reference_height - y[:, 1]))
        amp = -p.prefactor / (1j * p.beta) * self.mesh.h
        return (amp[:, None] if np.ndim(psi) > 1 else amp) * (E @ psi)


def assemble(params: WaveParams, profile: Profile, dissection: Dissection,
             n_nodes: int = DEFAULT_NODES, b: float | None = None) -> ForwardSolver:
    return ForwardSolver(params, profile, dissection, n_nodes, b)


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FieldRepr:
    """Scattered field ``S psi + extra`` plus the incident field that produced it.

    ``extra`` is an explicit radiating modal field (the upgoing part in the
    density synthesis); ``incident`` may be ``None`` for pure boundary-data
    solves.  ``psi`` may carry a trailing column axis.
    """

    solver: ForwardSolver
    psi: np.ndarray
    incident: ModalField | None = None
    extra: ModalField | None = None

    def scattered(self, x):
        out = self.solver.layer(self.psi, x)
        if self.extra is not None:
            out = out + self.extra(x)
        return out

    def scattered_grad(self, x):
        out = self.solver.layer_grad(self.psi, x)
        if self.extra is not None:
            out = out + self.extra.grad(x)
        return out

    def total(self, x):
        out = self.scattered(x)
        if self.incident is not None:
            out = out + self.incident(x)
        return out

    def surface_traces(self, sigma=None):
        """Scattered value and upward normal derivative on the curve.

        ``sigma=None`` uses the mesh nodes; other parameters use Nystrom
        interpolation (the density is interpolated trigonometrically for the
        jump term, which is algebraically accurate on graded meshes).
        """
        s = self.solver
        if sigma is None:
            curve = s.mesh.nodes
            S, Kp = s._S, s._Kp
            psi_t = self.psi
        else:
            curve = s.mesh.param.curve(np.asarray(sigma, dtype=float))
            if np.any(curve.speed <= 0):
                raise ValueError("trace requested at a grading point, where the parametrization is singular")
            S, Kp = s.surface_operators(curve)
            psi_t = _trig_interp(s, self.psi, curve.sigma)
        sp = curve.speed if np.ndim(self.psi) == 1 else curve.speed[:, None]
        u = S @ self.psi
        dn = Kp @ self.psi - psi_t / (2 * sp)
        if self.extra is not None:
            eu, edn = self.extra.traces(curve)
            u, dn = u + eu, dn + edn
        return u, dn, curve

    def boundary_residual(self, sigma=None) -> dict:
        """Relative boundary-condition residuals of the total field.

        Returns ``{"dirichlet": ..., "impedance": ...}``: the max over Gamma_D
        of ``|u|`` and over Gamma_I of ``|du/dnu + i lam u|``, each divided by
        the max of the same quantity for the incident field (or 1 when there
        is no incident field).
        """
        u, dn, curve = self.surface_traces(sigma)
        lam = self.solver.dissection.lam
        scale_d = scale_i = 1.0
        if self.incident is not None:
            iu, idn = self.incident.traces(curve)
            scale_d = max(np.max(np.abs(iu)), 1e-300)
            scale_i = max(np.max(np.abs(idn + 1j * lam * iu)), 1e-300)
            u, dn = u + iu, dn + idn
        imp = curve.impedance
        out = {"dirichlet": 0.0, "impedance": 0.0}
        if np.any(~imp):
            out["dirichlet"] = float(np.max(np.abs(u[~imp])) / scale_d)
        if np.any(imp):
            out["impedance"] = float(np.max(np.abs(dn[imp] + 1j * lam * u[imp])) / scale_i)
        return out

    def rayleigh(self, reference_height: float | None = None) -> RayleighSeq:
        b = self.solver.b if reference_height is None else float(reference_height)
        c = self.solver.layer_modes(self.psi, b)
        if self.extra is not None:
            e = self.extra
            if not np.allclose(e.kappa, self.solver.params.beta):
                raise ValueError("extra field is not upgoing")
            f = np.exp(1j * e.kappa * (b - e.anchor))
            c = c + (f[:, None] if np.ndim(e.coeffs) > 1 else f) * e.coeffs
        return RayleighSeq(self.solver.params, c, b)


def _trig_interp(solver: ForwardSolver, psi, sigma):
    """Trigonometric interpolation of node values in sigma (quasi-periodic phase removed)."""
    mesh = solver.mesh
    n = mesh.n
    shift = solver.params.alpha[0] * solver.params.period[0] / TWO_PI
    s0 = mesh.sigma[0]
    vals = np.asarray(psi) * (np.exp(-1j * shift * mesh.sigma)[:, None] if np.ndim(psi) > 1
                              else np.exp(-1j * shift * mesh.sigma))
    c = np.fft.fft(vals, axis=0) / n
    m = np.fft.fftfreq(n, 1 / n)
    c[n // 2] *= 0.5  # split the Nyquist term symmetrically
    m_full = np.concatenate([m, [n // 2]])
    c_full = np.concatenate([c, c[n // 2:n // 2 + 1]], axis=0)
    E = np.exp(1j * np.outer(np.asarray(sigma) - s0, m_full))
    out = E @ c_full
    ph = np.exp(1j * shift * np.asarray(sigma))
    return out * (ph[:, None] if out.ndim > 1 else ph)


def solve_boundary_data(solver: ForwardSolver, h1, h2) -> FieldRepr:
    """Radiating field with ``u = h1`` on Gamma_D nodes and ``du/dnu + i lam u = h2`` on Gamma_I nodes."""
    imp = solver.mesh.impedance
    h1 = np.asarray(h1, dtype=complex)
    h2 = np.asarray(h2, dtype=complex)
    if h1.shape[0] != np.sum(~imp) or h2.shape[0] != np.sum(imp):
        raise ValueError(f"expected {np.sum(~imp)} Dirichlet and {np.sum(imp)} impedance values")
    data = np.zeros((solver.mesh.n,) + h1.shape[1:], dtype=complex)
    data[~imp] = h1
    data[imp] = h2
    return FieldRepr(solver, solver.solve_density(data))


def split_data(solver: ForwardSolver, data):
    """Node data vector -> ``(h1, h2)``."""
    imp = solver.mesh.impedance
    return data[~imp], data[imp]


def solve_incident(solver: ForwardSolver, incident: ModalField) -> FieldRepr:
    """Scattered field of a physical incident field (total field meets the boundary conditions)."""
    psi = solver.solve_density(-solver.boundary_data(incident))
    return FieldRepr(solver, psi, incident)


def solve_plane_wave(solver: ForwardSolver, theta: float) -> FieldRepr:
    return solve_incident(solver, plane_wave(solver.params, theta))


def scattered_for_density(solver: ForwardSolver, g) -> FieldRepr:
    """Scattered field of ``u_in(.; g)``: physical solve for ``u_tilde`` plus the upgoing part."""
    p, b = solver.params, solver.b
    g = np.asarray(g, dtype=complex)
    tilde = synth_downgoing(p, b, g)
    psi = solver.solve_density(-solver.boundary_data(tilde))
    return FieldRepr(solver, psi, incident_from_density(p, b, g), upgoing_part(p, b, g))


def scattered_downgoing(solver: ForwardSolver, g) -> FieldRepr:
    """Scattered field of the unconjugated incident ``int g G(., y) ds(y)``."""
    return solve_incident(solver, incident_downgoing(solver.params, solver.b, g))


def near_trace(field: FieldRepr, M: int):
    """Scattered-field values at ``M`` uniform receivers on Gamma_b."""
    s = field.solver
    return field.scattered(receiver_nodes(s.params, s.b, M))


def representation(field: FieldRepr, x):
    """Green representation ``int_Gamma {u dK/dnu_y - du/dnu K} ds`` of the scattered field."""
    s = field.solver
    u, dn, _ = field.surface_traces()
    x = np.asarray(x, dtype=float)
    y = s.mesh.points
    nu = s.mesh.normals
    K, gx, gy = s.kernel.evaluate(x[..., None, 0] - y[:, 0], x[..., None, 1] - y[:, 1], grad=True)
    dKdnu_y = -(gx * nu[:, 0] + gy * nu[:, 1])
    w = s.mesh.weights
    return (dKdnu_y * w) @ u - (K * w) @ dn


def gamma_b_term(field: FieldRepr, x, M: int | None = None, height: float | None = None):
    """``int_{x2=height} {du/dx2 K - u dK/dy2} ds``; vanishes for radiating fields."""
    s = field.solver
    p = s.params
    M = M or 2 * p.trunc + 1
    yb = receiver_nodes(p, s.b if height is None else height, M)
    u = field.scattered(yb)
    du = field.scattered_grad(yb)[..., 1]
    x = np.asarray(x, dtype=float)
    K, _, gy = s.kernel.evaluate(x[..., None, 0] - yb[:, 0], x[..., None, 1] - yb[:, 1], grad=True)
    w = p.period[0] / M
    return (K * w) @ du + (gy * w) @ u


def representation_check(solver: ForwardSolver, field: FieldRepr, x) -> float:
    """Relative difference between the Green representation and the direct field value at ``x``."""
    x = np.asarray(x, dtype=float)
    c = classify(solver.profile, x)
    if c.distance < 0.1 or x[1] >= solver.b:
        raise ValueError("test point must lie at least 0.1 above the grating and below Gamma_b")
    direct = field.scattered(x)
    rep = representation(field, x)
    return float(np.abs(rep - direct) / np.abs(direct))
