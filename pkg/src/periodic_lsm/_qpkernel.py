"""Ewald-split evaluation of the 2D quasi-periodic Helmholtz kernel.

Used by the boundary-integral solver, where source and target both lie on the
grating and the plain spectral series does not converge.  The kernel here is
the lattice sum of the outgoing fundamental solution,

    K(x, y) = sum_m (i/4) H0(k |x - y - m d e1|) exp(i alpha m d),

i.e. it solves (Delta + k^2) K = -delta on the lattice.  Note the public
``greens.greens_qp`` uses the opposite overall sign.
"""
from __future__ import annotations

import numpy as np
from scipy import special

_LAGUERRE_X, _LAGUERRE_W = np.polynomial.laguerre.laggauss(32)
_EULER = np.euler_gamma


def _split_parameter(k: float, period: float) -> float:
    return max(np.sqrt(np.pi) / period, 0.5 * k)


def _gamma(k: float, alpha_n: np.ndarray) -> np.ndarray:
    # gamma_n = -i beta_n; Re gamma >= 0
    d = alpha_n**2 - k**2
    return np.where(d > 0, np.sqrt(np.abs(d)), -1j * np.sqrt(np.abs(d)))


class QPKernel:
    """Quasi-periodic kernel evaluator for fixed ``(k, alpha, period)``.

    Parameters
    ----------
    k, alpha, period : float
        Wavenumber, quasi-momentum and lateral period.
    """

    def __init__(self, k: float, alpha: float, period: float):
        self.k = float(k)
        self.alpha = float(alpha)
        self.period = float(period)
        self.E = _split_parameter(self.k, self.period)
        # spectral terms: erfc(gamma/2E) below 1e-18 past |alpha_n| ~ 12.5 E
        nmax = int(np.ceil((12.5 * self.E + abs(self.alpha) + self.k) * self.period / (2 * np.pi))) + 2
        self.n = np.arange(-nmax, nmax + 1)
        self.alpha_n = self.alpha + 2 * np.pi * self.n / self.period
        self.gamma_n = _gamma(self.k, self.alpha_n)
        if np.min(np.abs(self.gamma_n)) < 1e-8 * self.k:
            raise ValueError("kernel requested at a Wood anomaly")
        # spatial images: exp(-r^2 E^2) below 1e-17 for r > 6.3/E
        self.images = np.arange(1, int(np.ceil(6.3 / (self.E * self.period))) + 2)
        ratio = (self.k / (2 * self.E)) ** 2
        j = np.arange(0, 60)
        terms = ratio**j / special.factorial(j)
        self.jmax = int(np.searchsorted(-terms, -1e-18)) + 1
        self._jcoef = ratio ** np.arange(self.jmax) / special.factorial(np.arange(self.jmax))

    # -- spectral part -----------------------------------------------------
    def _spectral(self, X, Y, grad):
        E = self.E
        out = np.zeros(X.shape, dtype=complex)
        gx = np.zeros(X.shape, dtype=complex) if grad else None
        gy = np.zeros(X.shape, dtype=complex) if grad else None
        aY = np.abs(Y)
        sY = np.sign(Y)
        pref = 1.0 / (4 * self.period)
        for an, gn in zip(self.alpha_n, self.gamma_n):
            base = np.exp(-(gn / (2 * E)) ** 2 - (aY * E) ** 2)
            ap = gn / (2 * E) + aY * E
            am = gn / (2 * E) - aY * E
            tp = special.erfcx(ap) * base
            neg = np.real(am) < 0
            tm = np.where(neg,
                          2 * np.exp(-gn * aY) - special.erfcx(np.where(neg, -am, 0.0)) * base,
                          special.erfcx(np.where(neg, 0.0, am)) * base)
            ph = np.exp(1j * an * X)
            out += ph * (tp + tm) / gn
            if grad:
                gx += 1j * an * ph * (tp + tm) / gn
                gy += sY * ph * (tp - tm)
        out *= pref
        if grad:
            gx *= pref
            gy *= pref
        return out, gx, gy

    # -- spatial part ------------------------------------------------------
    def _image_term(self, r2, grad):
        """Spatial Ewald integral for well-separated images (r E >= ~1)."""
        E2 = self.E**2
        k2 = self.k**2
        v = _LAGUERRE_X[:, None]
        w = _LAGUERRE_W[:, None]
        rr = r2.ravel()[None, :]
        s2 = E2 + v / rr
        f = np.exp(k2 / (4 * s2))
        pre = np.exp(-rr * E2)
        val = (pre / (4 * np.pi)) * np.sum(w * f / (rr * s2), axis=0)
        dval = None
        if grad:
            # d/dr of the integral, divided by r
            dval = -(pre / (2 * np.pi * rr)) * np.sum(w * f, axis=0)
            dval = dval.reshape(r2.shape)
        return val.reshape(r2.shape), dval

    def _direct_term(self, r2, grad):
        """Spatial Ewald integral via the exponential-integral series."""
        z = r2 * self.E**2
        val = np.zeros(r2.shape)
        dval = np.zeros(r2.shape) if grad else None
        safe = np.where(z > 0, z, 1.0)
        for j in range(self.jmax):
            c = self._jcoef[j]
            val += c * special.expn(j + 1, safe)
            if grad:
                ej = np.exp(-safe) / safe if j == 0 else special.expn(j, safe)
                dval += c * (-2 * self.E**2) * ej
        val /= 4 * np.pi
        if grad:
            dval /= 4 * np.pi
        return val, dval

    def _spatial(self, r2, grad):
        """Spatial Ewald integral: Laguerre rule when r E > 4, series otherwise."""
        far = r2 * self.E**2 > 16.0
        v = np.zeros(r2.shape, dtype=complex)
        dv = np.zeros(r2.shape, dtype=complex) if grad else None
        if np.any(far):
            vf, dvf = self._image_term(r2[far], grad)
            v[far] = vf
            if grad:
                dv[far] = dvf
        near = ~far
        if np.any(near):
            vn, dvn = self._direct_term(r2[near], grad)
            v[near] = vn
            if grad:
                dv[near] = dvn
        return v, dv

    def evaluate(self, dx, dy, grad=False, subtract_free=False):
        """Kernel value (and gradient in the target variable) at offsets.

        Parameters
        ----------
        dx, dy : array_like
            Target minus source, lateral and vertical.
        grad : bool
            Also return ``(dK/dx, dK/dy)``.
        subtract_free : bool
            Return ``K - (i/4) H0(k r)`` for the unshifted copy, which is
            smooth at ``r = 0``; the diagonal limit is returned where r == 0.
        """
        dx = np.asarray(dx, dtype=float)
        dy = np.asarray(dy, dtype=float)
        dx, dy = np.broadcast_arrays(dx, dy)
        d = self.period
        m0 = np.round(dx / d)
        X = dx - m0 * d
        Y = dy
        shift_phase = np.exp(1j * self.alpha * m0 * d)

        val, gx, gy = self._spectral(X, Y, grad)

        # images m != 0
        for m in self.images:
            for sgn in (1, -1):
                Xm = X - sgn * m * d
                r2 = Xm**2 + Y**2
                ph = np.exp(1j * self.alpha * sgn * m * d)
                v, dv = self._spatial(r2, grad)
                val += ph * v
                if grad:
                    gx += ph * dv * Xm
                    gy += ph * dv * Y

        # image m = 0
        r2 = X**2 + Y**2
        r = np.sqrt(r2)
        v0, dv0 = self._spatial(r2, grad)
        if subtract_free:
            zero = r2 == 0
            kr = self.k * np.where(zero, 1.0, r)
            h0 = 0.25j * special.hankel1(0, kr)
            v0 = np.where(zero, 0.0, v0 - h0)
            if grad:
                h1r = -0.25j * self.k * special.hankel1(1, kr) / np.where(zero, 1.0, r)
                dv0 = np.where(zero, 0.0, dv0 - h1r)
            if np.any(zero):
                # r -> 0 limit of the m = 0 spatial term minus the free kernel
                jj = np.arange(1, self.jmax)
                lim = (_EULER / (4 * np.pi) + np.log(self.k / (2 * self.E)) / (2 * np.pi) - 0.25j
                       + np.sum(self._jcoef[1:] / jj) / (4 * np.pi))
                v0 = np.where(zero, lim, v0)
        val += v0
        if grad:
            gx += dv0 * X
            gy += dv0 * Y
            return val * shift_phase, gx * shift_phase, gy * shift_phase
        return val * shift_phase
