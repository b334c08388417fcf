"""Polynomialized characteristic function.

For a model with kernels of rank ``r_k`` the function

    D(x, theta) = prod_k d_k(x)^{r_k} * det[x^2 M + x G(x, theta) + K],

with ``d_k = 1 + nu_k x`` (or ``x + mu_k``), is a polynomial of degree
``2n + sum r_k`` in ``x``. Because parameters enter the model linearly, it is
also a polynomial in every parameter, of a degree that can be bounded from the
kernel ranks. Coefficients are recovered exactly (to rounding) by sampling the
determinant on circles in the complex plane and applying an FFT, which is a
unitary, perfectly conditioned interpolation.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

from . import kernels
from .model import DesignPlane, Ref, ViscoelasticModel

TRIM_RTOL = 1e-12


def _even_count(deg: int) -> int:
    # an even sample count with half-step rotation keeps every sample off the
    # real axis, where all kernel poles live
    m = deg + 1
    return m if m % 2 == 0 else m + 1


def _circle(center, radius, count):
    k = np.arange(count)
    return center + radius * np.exp(2j * np.pi * (k + 0.5) / count)


def _unfft(values, axis, radius, count):
    """Monomial coefficients (about the circle center) from circle samples."""
    a = np.fft.fft(values, axis=axis) / count
    k = np.arange(count)
    shape = [1] * values.ndim
    shape[axis] = count
    a = a * (np.exp(-1j * np.pi * k / count) / radius ** k).reshape(shape)
    return a


class _LinearModel:
    """Model bindings compiled to arrays so that theta may be array-valued."""

    def __init__(self, model: ViscoelasticModel):
        self.model = model
        n = model.n
        self.kernels = []
        for ker in model.kernels:
            C0 = np.zeros((n, n))
            Cp = {}
            for (i, j), b in ker.C:
                if isinstance(b, Ref):
                    B = Cp.setdefault(b.name, np.zeros((n, n)))
                    B[i, j] += b.multiplier
                    if i != j:
                        B[j, i] += b.multiplier
                else:
                    C0[i, j] += b.value
                    if i != j:
                        C0[j, i] += b.value
            self.kernels.append((ker.relax, ker.form, C0, Cp))

    def evaluate(self, x, theta):
        """D at broadcastable arrays ``x`` and ``theta[name]``."""
        model = self.model
        x = np.asarray(x)
        shape = np.broadcast_shapes(x.shape, *(np.shape(v) for v in theta.values()))
        x = np.broadcast_to(x, shape)[..., None, None]
        A = x * x * model.M + model.K
        factor = np.ones(shape, dtype=complex)
        for (relax, form, C0, Cp), r in zip(self.kernels, model.ranks):
            rv = np.broadcast_to(np.asarray(relax.evaluate(theta)), shape)[..., None, None]
            C = C0 + sum(np.asarray(theta[nm])[..., None, None] * B for nm, B in Cp.items())
            if form == "nu":
                den = 1.0 + rv * x
                A = A + x * C / den
            else:
                den = x + rv
                A = A + x * rv * C / den
            factor = factor * den[..., 0, 0] ** r
        return factor * np.linalg.det(A)

    def param_degree(self, name: str) -> int:
        """Upper bound on the degree of D in parameter ``name``."""
        deg = 0
        for (relax, form, C0, Cp), r in zip(self.kernels, self.model.ranks):
            if isinstance(relax, Ref) and relax.name == name:
                deg += r
            if name in Cp:
                deg += int(np.linalg.matrix_rank(Cp[name]))
        return deg


def polynomial_coeffs(model: ViscoelasticModel, theta, radius=None) -> np.ndarray:
    """Ascending real coefficients of D(x) at a full parameter vector ``theta``."""
    lin = _LinearModel(model)
    rho = model.natural_scale() if radius is None else radius
    count = _even_count(model.degree)
    xs = _circle(0.0, rho, count)
    vals = lin.evaluate(xs, {k: float(v) for k, v in theta.items()})
    return _unfft(vals, 0, rho, count)[: model.degree + 1].real.copy()


def direct_value(model: ViscoelasticModel, x, theta):
    """D(x) from a dense LU determinant of the dynamic stiffness matrix."""
    from scipy.linalg import lu_factor

    from .model import dynamic_stiffness

    A = dynamic_stiffness(model, x, theta)
    lu, piv = lu_factor(A)
    det = np.prod(np.diag(lu)) * (-1) ** int(np.sum(piv != np.arange(len(piv))))
    f = 1.0
    for ker, r in zip(model.kernels, model.ranks):
        f = f * ker.denominator(x, theta) ** r
    return f * det


@dataclass(frozen=True)
class PartialBundle:
    value: float
    dx: float
    dxx: float
    dp: float
    dq: float
    dxp: float
    dxq: float


def trim(coeffs, rtol=TRIM_RTOL) -> np.ndarray:
    """Drop vanishing leading (highest-power) coefficients."""
    c = np.asarray(coeffs)
    big = np.abs(c).max() if c.size else 0.0
    if big == 0.0:
        return c[:1] * 0
    keep = np.nonzero(np.abs(c) > rtol * big)[0]
    return c[: keep[-1] + 1]


def horner(coeffs, x):
    acc = 0.0 * x
    for c in coeffs[::-1]:
        acc = acc * x + c
    return acc


def eval_scale(coeffs, x, order=0) -> float:
    """Magnitude ``sum |c_k| |x|^k`` of the terms in the order-th x-derivative.

    Used to normalize residuals: rounding in evaluating D near ``x`` is a few
    ulps of this quantity.
    """
    c = np.abs(np.asarray(coeffs, dtype=float))
    for _ in range(order):
        c = c[1:] * np.arange(1, len(c))
    if c.size == 0:
        return 0.0
    return float(horner(c, abs(x)))


class CharacteristicFunction:
    """D(x, p, q) on a design plane, as an exact coefficient tensor.

    ``tensor[k, i, j]`` multiplies ``x**k * (p - p_center)**i * (q - q_center)**j``.
    """

    def __init__(self, model: ViscoelasticModel, plane: DesignPlane):
        plane.check(model)
        self.model = model
        self.plane = plane
        lin = _LinearModel(model)
        self.degree = model.degree
        self.deg_p = lin.param_degree(plane.p_name)
        self.deg_q = lin.param_degree(plane.q_name)
        self.rho = model.natural_scale()
        (p0, p1), (q0, q1) = plane.p_range, plane.q_range
        self.p_center, self.q_center = 0.5 * (p0 + p1), 0.5 * (q0 + q1)
        rp, rq = max(0.5 * (p1 - p0), 1.0), max(0.5 * (q1 - q0), 1.0)
        nx, np_, nq = _even_count(self.degree), _even_count(self.deg_p), _even_count(self.deg_q)
        xs = _circle(0.0, self.rho, nx)[:, None, None]
        ps = _circle(self.p_center, rp, np_)[None, :, None]
        qs = _circle(self.q_center, rq, nq)[None, None, :]
        theta = {k: float(v) for k, v in plane.fixed.items()}
        theta[plane.p_name] = ps
        theta[plane.q_name] = qs
        vals = lin.evaluate(xs, theta)
        t = _unfft(vals, 0, self.rho, nx)
        t = _unfft(t, 1, rp, np_)
        t = _unfft(t, 2, rq, nq)
        t = t[: self.degree + 1, : self.deg_p + 1, : self.deg_q + 1]
        self.imag_residual = float(np.abs(t.imag).max() / max(np.abs(t.real).max(), 1e-300))
        self.tensor = np.ascontiguousarray(t.real)
        self.tensor.setflags(write=False)

    # coefficient vectors in x ------------------------------------------------

    def coeff_derivs(self, p, q, mp=0, mq=0) -> np.ndarray:
        """Coefficients in x of d^b/dp^b d^c/dq^c D, shape (degree+1, mp+1, mq+1).

        ``p`` and ``q`` may be 1-d arrays, in which case a leading grid axis is
        added.
        """
        T = self.tensor
        u = np.asarray(p, dtype=float) - self.p_center
        v = np.asarray(q, dtype=float) - self.q_center
        Pu = _power_derivs(u, T.shape[1] - 1, mp)  # (..., I, mp+1)
        Qv = _power_derivs(v, T.shape[2] - 1, mq)
        if Pu.ndim == 2 and Qv.ndim == 2:
            return np.einsum("kij,ib,jc->kbc", T, Pu, Qv, optimize=False)
        return np.einsum("kij,...ib,...jc->...kbc", T, Pu, Qv)

    def coeffs(self, p, q) -> np.ndarray:
        return self.coeff_derivs(p, q)[..., 0, 0]

    def theta(self, p, q) -> dict:
        return self.plane.theta(p, q)

    # point evaluation ----------------------------------------------------------

    def evaluate(self, x, p, q):
        """Horner evaluation of D; ``x`` may be complex."""
        return horner(self.coeffs(p, q), x)

    __call__ = evaluate

    def derivatives(self, x, p, q, mx=2, mp=1, mq=1) -> np.ndarray:
        """Array ``out[a, b, c] = d^{a+b+c} D / dx^a dp^b dq^c``."""
        return kernels.derivatives(self.tensor, float(x), float(p) - self.p_center,
                                   float(q) - self.q_center, mx, mp, mq)

    def partials(self, x, p, q) -> PartialBundle:
        d = self.derivatives(x, p, q, 2, 1, 1)
        return PartialBundle(
            value=d[0, 0, 0], dx=d[1, 0, 0], dxx=d[2, 0, 0],
            dp=d[0, 1, 0], dq=d[0, 0, 1], dxp=d[1, 1, 0], dxq=d[1, 0, 1],
        )

    def scale(self, p, q) -> float:
        return float(np.abs(self.coeffs(p, q)).max())

    def residuals(self, x, p, q):
        """(|D|, |D_x|) normalized by the magnitude of their terms at x."""
        c = self.coeffs(p, q)
        d = np.polynomial.polynomial.polyder(c)
        sD = max(eval_scale(c, x, 0), 1e-300)
        sDx = max(eval_scale(c, x, 1), 1e-300)
        return abs(horner(c, x)) / sD, abs(horner(d, x)) / sDx

    def degree_check(self, p, q) -> int:
        return len(trim(self.coeffs(p, q))) - 1

    def correct(self, p, x, q, tol=1e-10, maxit=8):
        """Newton projection onto D = D_x = 0 at fixed p.

        Returns ``(x, q, iterations, converged, res_D, res_Dx)``.
        """
        x, v, it, ok, rD, rDx = kernels.correct(self.tensor, float(p) - self.p_center,
                                                float(x), float(q) - self.q_center, tol, maxit)
        return x, v + self.q_center, it, bool(ok), rD, rDx


@lru_cache(maxsize=None)
def _falling(deg, m):
    i = np.arange(deg + 1)
    coef = np.array([[factorial(k) / factorial(k - b) if k >= b else 0.0 for b in range(m + 1)]
                     for k in i])
    expo = np.maximum(i[:, None] - np.arange(m + 1)[None, :], 0)
    return coef, expo


def _power_derivs(t, deg, m):
    """d^b/dt^b t^i for i <= deg, b <= m; shape t.shape + (deg+1, m+1)."""
    t = np.asarray(t, dtype=float)
    coef, expo = _falling(deg, m)
    return coef * t[..., None, None] ** expo


def assemble(model: ViscoelasticModel, plane: DesignPlane) -> CharacteristicFunction:
    return CharacteristicFunction(model, plane)
