"""Closed-form results for one dof with one exponential kernel.

The characteristic polynomial is ``nu x^3 + x^2 + (nu + 2 zeta) x + 1``. Its
critical curves (double negative root) bound the overdamped region
``zeta_L(nu) <= zeta <= zeta_U(nu)``; the two meet at a cusp (triple root
``x = -sqrt(3)``) at ``nu = 1/(3 sqrt(3))``, beyond which no overdamped
region exists.

All functions accept scalars or numpy arrays.
"""
from __future__ import annotations

import numpy as np

from .charfun import trim

ARCCOS_SLACK = 1e-12
NU_SMALL = 1e-12
NU_CUSP = 1.0 / (3.0 * np.sqrt(3.0))


class DomainError(ValueError):
    """The closed form is not defined at the requested nu."""


def _branch(branch):
    b = str(branch).upper()
    if b not in ("L", "U"):
        raise ValueError(f"branch must be 'L' or 'U', got {branch!r}")
    return b


def _theta(nu):
    s2 = 1.0 + 216.0 * nu**2
    arg = -(5832.0 * nu**4 + 540.0 * nu**2 - 1.0) / s2**1.5
    bad = np.abs(arg) > 1.0 + ARCCOS_SLACK
    if np.any(bad):
        raise DomainError(f"arccos argument out of range for nu={np.asarray(nu)[bad] if np.ndim(nu) else nu}")
    return np.arccos(np.clip(arg, -1.0, 1.0)), np.sqrt(s2)


def zeta_exact(nu, branch="L"):
    """Exact lower or upper critical damping ratio at ``nu``.

    For ``nu`` below 1e-12 the limits are returned: 1 for the lower curve and
    ``inf`` for the upper one. Negative ``nu`` raises ValueError; ``nu`` past
    the cusp raises DomainError.
    """
    b = _branch(branch)
    nu_arr = np.asarray(nu, dtype=float)
    if np.any(nu_arr < 0):
        raise ValueError("nu must be nonnegative")
    small = nu_arr < NU_SMALL
    safe = np.where(small, 0.1, nu_arr)
    th, s = _theta(safe)
    ang = (4.0 * np.pi + th) / 3.0 if b == "L" else th / 3.0
    z = (1.0 - 12.0 * safe**2 + 2.0 * s * np.cos(ang)) / (24.0 * safe)
    z = np.where(small, 1.0 if b == "L" else np.inf, z)
    return float(z) if np.ndim(nu) == 0 else z


def implicit_residual(zeta, nu):
    """Left-hand side of the implicit critical-surface equation (zero on the curves)."""
    z, n = np.asarray(zeta, dtype=float), np.asarray(nu, dtype=float)
    r = 8 * z**3 * n + 12 * z**2 * n**2 - z**2 + 6 * z * n**3 - 10 * z * n + n**4 + 2 * n**2 + 1
    return float(r) if np.ndim(r) == 0 else r


def implicit_residual_normalized(zeta, nu):
    """``implicit_residual`` divided by its largest monomial magnitude (at least 1)."""
    z, n = np.abs(np.asarray(zeta, dtype=float)), np.abs(np.asarray(nu, dtype=float))
    mono = np.stack(np.broadcast_arrays(
        8 * z**3 * n, 12 * z**2 * n**2, z**2, 6 * z * n**3, 10 * z * n, n**4, 2 * n**2, np.ones_like(z)))
    r = np.abs(implicit_residual(zeta, nu)) / np.maximum(mono.max(axis=0), 1.0)
    return float(r) if np.ndim(r) == 0 else r


def zeta_approx(nu, branch="L"):
    """Second-order small-nu approximations of the critical damping ratio.

    L: ``1 - nu - nu^2/2``. U: ``1/(8 nu) - nu/2`` (the ratio at which the
    polynomial pivots coincide).
    """
    b = _branch(branch)
    n = np.asarray(nu, dtype=float)
    if b == "L":
        z = 1.0 - n - 0.5 * n**2
    else:
        if np.any(n <= 0):
            raise ValueError("upper-curve approximation needs nu > 0")
        z = 1.0 / (8.0 * n) - 0.5 * n
    return float(z) if np.ndim(nu) == 0 else z


def x_approx(nu, branch="L"):
    """Approximate critical eigenvalue: ``-1 - nu - 5 nu^2/2`` (L) or ``-1/(2 nu)`` (U)."""
    b = _branch(branch)
    n = np.asarray(nu, dtype=float)
    if b == "L":
        x = -1.0 - n - 2.5 * n**2
    else:
        if np.any(n <= 0):
            raise ValueError("upper-curve approximation needs nu > 0")
        x = -1.0 / (2.0 * n)
    return float(x) if np.ndim(nu) == 0 else x


def _double_root(nu, zeta, branch):
    """Double root on a critical curve, from the roots of ``D_x``.

    ``x = (-1 +- sqrt(1 - 6 zeta nu - 3 nu^2)) / (3 nu)``; the + sign belongs to
    the lower curve. At ``nu = 0`` the lower-curve limit ``-zeta`` is used.
    """
    b = _branch(branch)
    if nu < NU_SMALL:
        if b == "U":
            raise ValueError("upper curve has no double root at nu = 0")
        return -float(zeta)
    disc = max(1.0 - 6.0 * zeta * nu - 3.0 * nu**2, 0.0)
    sign = 1.0 if b == "L" else -1.0
    return (-1.0 + sign * np.sqrt(disc)) / (3.0 * nu)


def pivots(coeffs):
    """The two polynomial pivots ``-a1/2 +- sqrt((a1/2)^2 - a2)``.

    ``a1`` and ``a2`` are the coefficients of ``x^(d-1)`` and ``x^(d-2)`` of
    the monic form; ``coeffs`` are ascending. Returns two complex numbers.
    """
    c = trim(np.asarray(coeffs, dtype=float))
    if not np.any(c):
        raise ValueError("zero polynomial")
    if len(c) < 3:
        raise ValueError("pivots need a polynomial of degree >= 2")
    a1, a2 = c[-2] / c[-1], c[-3] / c[-1]
    root = np.sqrt(complex((a1 / 2.0) ** 2 - a2))
    return complex(-a1 / 2.0 + root), complex(-a1 / 2.0 - root)


def sdof_coeffs(nu, zeta):
    """Ascending coefficients ``[1, nu + 2 zeta, 1, nu]``."""
    return np.array([1.0, nu + 2.0 * zeta, 1.0, nu])


__all__ = [
    "DomainError", "NU_CUSP", "implicit_residual", "implicit_residual_normalized", "pivots",
    "sdof_coeffs", "x_approx", "zeta_approx", "zeta_exact",
]
