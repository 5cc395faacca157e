"""Analytic references: round-wire skin effect and DC sheet resistance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .surface_impedance import MU0

SERIES_LIMIT = 18.0  # |ka| below this uses power series, above it the Hankel expansion
_N_ASYMP = 12


@dataclass(frozen=True)
class WireSpec:
    radius: float
    length: float
    sigma: float

    def __post_init__(self):
        if not (self.radius > 0 and self.length > 0 and self.sigma > 0):
            raise ValueError("wire radius, length and conductivity must be positive")

    @property
    def dc_resistance(self) -> float:
        return self.length / (self.sigma * np.pi * self.radius**2)


def ratio_series(z, terms: int = 160) -> np.ndarray:
    """``z J0(z) / (2 J1(z))`` from the power series (small |z|).

    Written as ``1 + D/S`` with ``u = z^2/4``,
    ``S = sum (-u)^k / (k! (k+1)!)`` and ``D = sum_{k>=1} (-u)^k / ((k-1)! (k+1)!)``,
    so the O(z^2) departure from 1 never comes from a cancellation.
    """
    z = np.asarray(z, dtype=complex)
    mu = -(z * z) / 4
    t = np.ones_like(z)  # (-u)^k / (k! (k+1)!)
    S = t.copy()
    D = np.zeros_like(z)
    for k in range(1, terms):
        t = t * mu / (k * (k + 1))
        S = S + t
        D = D + k * t
        if np.all(np.abs(t) * k <= 1e-17 * np.abs(D)):
            break
    return 1 + D / S


def _hankel_pq(z, nu):
    mu = 4 * nu * nu
    P = np.zeros_like(z)
    Q = np.zeros_like(z)
    a = 1.0
    for k in range(2 * _N_ASYMP):
        if k:
            a = a * (mu - (2 * k - 1) ** 2) / (k * 8)
        t = a / z**k
        if k % 2 == 0:
            P = P + (-1) ** (k // 2) * t
        else:
            Q = Q + (-1) ** (k // 2) * t
    return P, Q


def ratio_asymptotic(z) -> np.ndarray:
    """``z J0(z) / (2 J1(z))`` from the large-argument expansion."""
    z = np.asarray(z, dtype=complex)
    # the ratio is even in z; the expansion degrades towards arg z = +-pi
    z = np.where(z.real < 0, -z, z)
    # work in the lower half plane, where e^{i chi} dominates; conjugate back
    flip = z.imag > 0
    w = np.where(flip, np.conj(z), z)
    P0, Q0 = _hankel_pq(w, 0)
    P1, Q1 = _hankel_pq(w, 1)
    small = np.exp(-2j * w)  # e^{-2iw}, |.| = e^{2 Im w} <= 1
    # J_nu ~ e^{i chi}(P + iQ)/2 + e^{-i chi}(P - iQ)/2, chi = w - nu pi/2 - pi/4
    e0 = np.exp(-1j * np.pi / 4)
    e1 = np.exp(-3j * np.pi / 4)
    num = e0 * (P0 + 1j * Q0) + small / e0 * (P0 - 1j * Q0)
    den = e1 * (P1 + 1j * Q1) + small / e1 * (P1 - 1j * Q1)
    r = w * num / (2 * den)
    return np.where(flip, np.conj(r), r)


def bessel_ratio(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < SERIES_LIMIT
    out = np.empty(z.shape, dtype=complex)
    out[small] = ratio_series(z[small])
    out[~small] = ratio_asymptotic(z[~small])
    return out


def wire_internal_impedance(spec: WireSpec, f):
    """Internal impedance of a straight round wire, ohms.

    ``Z = l * k J0(ka) / (2 pi a sigma J1(ka))`` with ``k = sqrt(-j w mu0 sigma)``,
    which equals ``R_dc * (ka) J0(ka) / (2 J1(ka))``.
    """
    f_arr = np.asarray(f, dtype=float)
    if np.any(f_arr < 0):
        raise ValueError("frequency must be non-negative")
    k = np.sqrt(-1j * 2 * np.pi * f_arr * MU0 * spec.sigma)
    z = spec.dc_resistance * bessel_ratio(k * spec.radius)
    return z if z.ndim else complex(z)


def wire_internal_inductance(spec: WireSpec, f) -> np.ndarray:
    """``Im Z / w``; tends to ``mu0 l / 8 pi`` at DC."""
    f = np.asarray(f, dtype=float)
    w = 2 * np.pi * f
    z = np.asarray(wire_internal_impedance(spec, f))
    dc = MU0 * spec.length / (8 * np.pi)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(f > 0, z.imag / np.where(w > 0, w, 1.0), dc)


def wire_reference_L(spec: WireSpec, f, L_measured_at_f0: float, f0: float) -> np.ndarray:
    """Internal inductance plus a constant external part fitted at ``f0``."""
    ext = L_measured_at_f0 - float(wire_internal_inductance(spec, f0))
    return wire_internal_inductance(spec, f) + ext


def dc_plate_resistance(length: float, width: float, sigma: float, thickness: float) -> float:
    if not (length > 0 and width > 0 and sigma > 0 and thickness > 0):
        raise ValueError("plate dimensions and conductivity must be positive")
    return length / (sigma * width * thickness)


def neumann_mutual(path_a: np.ndarray, path_b: np.ndarray, n_sub: int = 40) -> float:
    """Mutual inductance of two filament polylines (Neumann double line integral).

    Each polyline is split into ``n_sub`` Gauss-Legendre points per segment.
    The paths must not touch; accuracy drops once their spacing falls well
    below a tenth of a segment length (raise ``n_sub`` then).
    """
    g, w = np.polynomial.legendre.leggauss(n_sub)
    t, w = (g + 1) / 2, w / 2

    def samples(path):
        path = np.asarray(path, dtype=float)
        a, b = path[:-1], path[1:]
        pts = a[:, None] + t[None, :, None] * (b - a)[:, None]
        dl = (b - a)[:, None, :] * w[None, :, None]
        return pts.reshape(-1, 3), dl.reshape(-1, 3)

    pa, da = samples(path_a)
    pb, db = samples(path_b)
    r = np.linalg.norm(pa[:, None] - pb[None], axis=-1)
    if r.min() <= 0:
        raise ValueError("filaments intersect")
    return float(MU0 / (4 * np.pi) * np.sum((da @ db.T) / r))
