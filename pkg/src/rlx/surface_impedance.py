"""Double-plane equivalent surface impedance.

Each conductor is represented by two current-carrying planes, each with
DC sheet resistance ``R_DC = 2/(sigma*zeta)`` and high-frequency surface
resistance ``R_RF*sqrt(f)`` with ``R_RF = sqrt(pi*mu0/sigma)``.

Two closures are available. ``"coth"`` (default) is the exact surface
impedance of a symmetrically driven slab of thickness ``zeta``::

    Z_s = x * coth(x / R_DC),    x = (1+j) R_RF sqrt(f)

``"exp"`` is the single-exponential closure ``x / (1 - exp(-x/R_DC))``.
Both tend to ``R_DC`` at DC and to ``x`` at high frequency, but the
exponential form carries a first-order term ``x/2`` at low frequency,
which gives an internal inductance diverging like ``1/sqrt(f)``.
"""

from __future__ import annotations

import numpy as np

from .geometry import ConductorMaterial

MU0 = 4e-7 * np.pi
MODELS = ("coth", "exp")

_SERIES_CUTOFF = 1e-4


def _params(sigma: float, thickness: float):
    if not (sigma > 0 and thickness > 0):
        raise ValueError("sigma and thickness must be positive")
    return 2.0 / (sigma * thickness), np.sqrt(np.pi * MU0 / sigma)


def esi(material: ConductorMaterial, f, model: str = "coth"):
    """Surface impedance in ohms per square; vectorised over ``f``."""
    return esi_value(material.sigma, material.thickness, f, model)


def esi_value(sigma: float, thickness: float, f, model: str = "coth"):
    if model not in MODELS:
        raise ValueError(f"unknown ESI model {model!r}")
    r_dc, r_rf = _params(sigma, thickness)
    f_arr = np.asarray(f, dtype=float)
    if np.any(f_arr < 0):
        raise ValueError("frequency must be non-negative")
    u = (1 + 1j) * r_rf * np.sqrt(f_arr) / r_dc
    small = np.abs(u) < _SERIES_CUTOFF
    us = np.where(small, 1.0, u)  # keep the closed form away from u = 0
    with np.errstate(over="ignore", invalid="ignore"):
        if model == "coth":
            e = np.exp(-2 * us)
            closed = us * (1 + e) / (1 - e)
            # u coth u = 1 + u^2/3 - u^4/45 + 2u^6/945
            u2 = u * u
            series = 1 + u2 / 3 - u2**2 / 45 + 2 * u2**3 / 945
        else:
            closed = us / (1 - np.exp(-us))
            # u/(1-e^-u) = 1 + u/2 + u^2/12 - u^4/720
            series = 1 + u / 2 + u * u / 12 - u**4 / 720
    out = r_dc * np.where(small, series, closed)
    return out if out.ndim else complex(out)


def skin_depth(material: ConductorMaterial | float, f):
    sigma = material.sigma if isinstance(material, ConductorMaterial) else float(material)
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("skin depth needs f > 0")
    d = 1.0 / np.sqrt(np.pi * f * MU0 * sigma)
    return d if d.ndim else float(d)
