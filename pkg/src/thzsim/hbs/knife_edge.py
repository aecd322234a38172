"""Fresnel knife-edge kernel.

``F(nu) = (1+j)/2 * integral_nu^inf exp(-j pi t^2 / 2) dt`` is evaluated from the
Fresnel integrals C and S (Cephes rational/asymptotic approximations via
``scipy.special.fresnel``), which are accurate to ~1e-15 for all finite nu.
"""

from __future__ import annotations

import numpy as np
from scipy.special import fresnel


def knife_edge_coeff(nu):
    """Field behind a half-plane relative to free space (complex)."""
    nu = np.asarray(nu, dtype=float)
    s, c = fresnel(nu)
    out = 0.5 * (1 + 1j) * ((0.5 - c) - 1j * (0.5 - s))
    return complex(out) if out.ndim == 0 else out


def knife_edge_loss_db(nu):
    return -20 * np.log10(np.abs(knife_edge_coeff(nu)))


def diffraction_term(nu):
    """Edge contribution with the geometric-optics part removed.

    For nu < 0 (the edge clears the ray) the unobstructed field is subtracted,
    so ``LoS + diffraction_term`` reproduces ``F(nu)`` for a single edge.  At
    nu == 0 the ray is treated as obstructed.
    """
    nu = np.asarray(nu, dtype=float)
    f = knife_edge_coeff(nu)
    out = f - (nu < 0)
    return complex(out) if np.ndim(out) == 0 else out


def clearance_nu(excess_path_m, wavelength_m, sign=1.0):
    """nu = sign * 2 sqrt(excess / lambda); equals h*sqrt(2 d / (lambda d1 d2)) paraxially."""
    return sign * 2.0 * np.sqrt(np.maximum(excess_path_m, 0.0) / wavelength_m)
