"""Tracing critical curves q(p), lam(p) by predictor-corrector continuation.

Along a curve ``D = D_x = 0`` the implicit function theorem gives

    q'   = -D_p / D_q
    lam' = D_p D_xq / (D_q D_xx) - D_xp / D_xx

which is integrated with a classical RK4 step in p. Every step is followed by
a Newton projection back onto ``D = D_x = 0`` at the new p, and the step is
accepted only when that projection converges quickly.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .charfun import CharacteristicFunction, eval_scale
from .roots import CriticalPoint, classify_spectrum, find_initial_points


class Termination(str, enum.Enum):
    RANGE_EXIT = "RangeExit"
    SINGULAR_DXX = "SingularDxx"
    SINGULAR_DQ = "SingularDq"
    LAMBDA_NON_NEGATIVE = "LambdaNonNegative"
    MAX_STEPS = "MaxSteps"
    CORRECTOR_FAILURE = "CorrectorFailure"

    def __str__(self):
        return self.value


class SingularityError(ArithmeticError):
    """The tangent of the curve is undefined (``D_q`` or ``D_xx`` vanishes)."""

    def __init__(self, kind: Termination, value: float):
        super().__init__(f"{kind.value}: normalized denominator {value:.3e}")
        self.kind = kind
        self.value = value


class StartError(ValueError):
    pass


@dataclass(frozen=True)
class TraceConfig:
    """Step control and stopping rules.

    Step sizes left as ``None`` are derived from the width ``w`` of the p range:
    ``h0 = 1e-3 w``, ``h_min = 1e-10 w``, ``h_max = 2e-2 w``.
    """

    h0: float | None = None
    h_min: float | None = None
    h_max: float | None = None
    tol_res: float = 1e-10
    sing_tol: float = 1e-8
    max_steps: int = 100_000
    direction: int | str = "both"
    corrector_maxit: int = 8
    # a corrector failure at h_min is read as a singular endpoint when the
    # smaller normalized denominator is below this
    endpoint_tol: float = 1e-2
    # a step is kept only if cubic Hermite interpolation reproduces q at the
    # interval midpoint to within interp_tol * (1 + |q|)
    interp_tol: float = 1e-10

    def resolved(self, plane) -> "TraceConfig":
        w = plane.p_range[1] - plane.p_range[0]
        cfg = replace(
            self,
            h0=1e-3 * w if self.h0 is None else float(self.h0),
            h_min=1e-10 * w if self.h_min is None else float(self.h_min),
            h_max=2e-2 * w if self.h_max is None else float(self.h_max),
        )
        cfg.validate()
        return cfg

    def validate(self):
        problems = []
        if not (0 < self.h_min <= self.h0 <= self.h_max):
            problems.append(f"need 0 < h_min <= h0 <= h_max, got {self.h_min}, {self.h0}, {self.h_max}")
        for name in ("tol_res", "sing_tol", "endpoint_tol", "interp_tol"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be positive")
        if self.max_steps < 1:
            problems.append("max_steps must be at least 1")
        if self.direction not in (1, -1, "both", "+1", "-1"):
            problems.append(f"direction must be +1, -1 or 'both', got {self.direction!r}")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass
class CriticalCurve:
    points: list
    termination: Termination
    direction: int
    slopes: list = field(default_factory=list)  # (q', lam') at each point
    steps: int = 0
    rejected: int = 0
    # for a joined two-sided curve: why the low-p end stopped
    start_termination: Termination | None = None

    @classmethod
    def join(cls, backward: "CriticalCurve", forward: "CriticalCurve") -> "CriticalCurve":
        """One curve, ordered by increasing p, from two halves sharing a start point."""
        if backward.direction > 0:
            backward, forward = forward, backward
        return cls(
            points=backward.points[::-1] + forward.points[1:],
            termination=forward.termination,
            direction=+1,
            slopes=list(backward.slopes[::-1]) + list(forward.slopes[1:]),
            steps=backward.steps + forward.steps,
            rejected=backward.rejected + forward.rejected,
            start_termination=backward.termination,
        )

    @property
    def max_residual(self) -> float:
        return max((max(c.res_D, c.res_Dx) for c in self.points), default=0.0)

    @property
    def p(self):
        return np.array([c.p for c in self.points])

    @property
    def q(self):
        return np.array([c.q for c in self.points])

    @property
    def lam(self):
        return np.array([c.lam for c in self.points])

    def __len__(self):
        return len(self.points)

    @property
    def p_span(self):
        p = self.p
        return float(p.min()), float(p.max())

    def interpolate(self, p):
        """Cubic Hermite interpolation of (q, lam) at ``p`` using the stored slopes.

        Returns NaN outside the traced p span.
        """
        P = self.p
        order = np.argsort(P)
        P = P[order]
        Y = np.stack([self.q, self.lam], axis=1)[order]
        S = np.array(self.slopes)[order]
        p = np.atleast_1d(np.asarray(p, dtype=float))
        out = np.full((len(p), 2), np.nan)
        if len(P) < 2:
            return out
        k = np.clip(np.searchsorted(P, p) - 1, 0, len(P) - 2)
        inside = (p >= P[0]) & (p <= P[-1])
        h = P[k + 1] - P[k]
        t = (p - P[k]) / h
        h00 = 2 * t**3 - 3 * t**2 + 1
        h10 = t**3 - 2 * t**2 + t
        h01 = -2 * t**3 + 3 * t**2
        h11 = t**3 - t**2
        val = (h00[:, None] * Y[k] + (h10 * h)[:, None] * S[k]
               + h01[:, None] * Y[k + 1] + (h11 * h)[:, None] * S[k + 1])
        out[inside] = val[inside]
        return out

    def metadata(self) -> dict:
        return {
            "direction": self.direction,
            "termination": self.termination.value,
            **({"start_termination": self.start_termination.value} if self.start_termination else {}),
            "points": len(self.points),
            "steps": self.steps,
            "rejected_steps": self.rejected,
            "max_residual": self.max_residual,
            "p_span": list(self.p_span) if self.points else None,
        }


# ---------------------------------------------------------------------------

def _denominators(cf, x, p, q):
    """Partials plus normalized |D_xx| and |D_q|."""
    d = cf.derivatives(x, p, q, 2, 1, 1)
    CD = cf.coeff_derivs(p, q, 0, 1)
    sxx = max(eval_scale(CD[:, 0, 0], x, 2), 1e-300)
    sq = max(eval_scale(CD[:, 0, 1], x, 0), 1e-300)
    return d, abs(d[2, 0, 0]) / sxx, abs(d[0, 0, 1]) / sq


def _rhs(d):
    Dp, Dq, Dxx, Dxp, Dxq = d[0, 1, 0], d[0, 0, 1], d[2, 0, 0], d[1, 1, 0], d[1, 0, 1]
    qp = -Dp / Dq
    lp = Dp * Dxq / (Dq * Dxx) - Dxp / Dxx
    return qp, lp


def _unpack(point):
    if isinstance(point, CriticalPoint):
        return point.p, point.q, point.lam
    p, q, lam = point
    return float(p), float(q), float(lam)


def ode_rhs(cf: CharacteristicFunction, point, sing_tol=1e-8):
    """``(q', lam')`` at a point on a critical curve.

    ``point`` is a CriticalPoint or a ``(p, q, lam)`` triple. Raises
    SingularityError when the normalized ``D_xx`` or ``D_q`` is below
    ``sing_tol``.
    """
    p, q, x = _unpack(point)
    d, rxx, rq = _denominators(cf, x, p, q)
    if rxx < sing_tol:
        raise SingularityError(Termination.SINGULAR_DXX, rxx)
    if rq < sing_tol:
        raise SingularityError(Termination.SINGULAR_DQ, rq)
    return _rhs(d)


def _f(cf, p, y):
    d = cf.derivatives(y[1], p, y[0], 2, 1, 1)
    return np.array(_rhs(d))


def _rk4(cf, p, y, h):
    k1 = _f(cf, p, y)
    k2 = _f(cf, p + h / 2, y + h / 2 * k1)
    k3 = _f(cf, p + h / 2, y + h / 2 * k2)
    k4 = _f(cf, p + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


# accepted points are converged to this fraction of tol_res: where Newton is
# only linearly convergent (next to a triple root) the step is refused instead
POLISH = 1e-3


def _midpoint_ok(cf, cfg, a, b):
    """Dense-output check: Hermite q at the midpoint against a corrected point."""
    pa, qa, xa, sa = a
    pb, qb, xb, db = b
    with np.errstate(all="ignore"):
        sb = _rhs(db)
    if not np.all(np.isfinite(sb)):
        return True  # slope blows up at a singular end; nothing to compare
    h = pb - pa
    pm = 0.5 * (pa + pb)
    qh = 0.5 * (qa + qb) + h / 8 * (sa[0] - sb[0])
    xh = 0.5 * (xa + xb) + h / 8 * (sa[1] - sb[1])
    xm, qm, _, ok, _, _ = cf.correct(pm, xh, qh, cfg.tol_res, cfg.corrector_maxit)
    return ok and abs(qm - qh) <= cfg.interp_tol * (1.0 + abs(qh))


def _trace_one(cf, start, cfg, direction):
    plane = cf.plane
    (p_lo, p_hi), (q_lo, q_hi) = plane.p_range, plane.q_range
    p, q, x = _unpack(start)
    d, rxx, rq = _denominators(cf, x, p, q)
    pts = [start]
    slopes = [_rhs(d)]
    h = cfg.h0
    streak = steps = rejected = 0
    reason = Termination.MAX_STEPS

    while steps < cfg.max_steps:
        if rxx < cfg.sing_tol:
            reason = Termination.SINGULAR_DXX
            break
        if rq < cfg.sing_tol:
            reason = Termination.SINGULAR_DQ
            break
        edge = p_hi if direction > 0 else p_lo
        if abs(edge - p) <= 1e-14 * (1.0 + abs(p)):
            reason = Termination.RANGE_EXIT
            break
        if min(rxx, rq) < 10 * cfg.sing_tol:
            h = cfg.h_min
        step = min(h, abs(edge - p))
        steps += 1
        y = np.array([q, x])
        try:
            with np.errstate(all="raise"):
                yp = _rk4(cf, p, y, direction * step)
        except FloatingPointError:
            yp = np.array([np.nan, np.nan])
        ok = bool(np.all(np.isfinite(yp)))
        if ok:
            pn = edge if step == abs(edge - p) else p + direction * step
            xn, qn, it, ok, rD, rDx = cf.correct(pn, yp[1], yp[0], POLISH * cfg.tol_res,
                                                 cfg.corrector_maxit)
            # the projection must stay on this branch: compare with the predictor
            ok = ok and abs(xn - yp[1]) <= 0.1 * (1.0 + abs(x)) and abs(qn - yp[0]) <= 0.1 * (1.0 + abs(q))
        dn = None
        if ok:
            dn = _denominators(cf, xn, pn, qn)
            if step > cfg.h_min * (1 + 1e-12):
                ok = _midpoint_ok(cf, cfg, (p, q, x, slopes[-1]), (pn, qn, xn, dn[0]))
        if not ok:
            rejected += 1
            streak = 0
            if step <= cfg.h_min * (1 + 1e-12):
                small = min(rxx, rq)
                if small < cfg.endpoint_tol:
                    reason = Termination.SINGULAR_DXX if rxx <= rq else Termination.SINGULAR_DQ
                else:
                    reason = Termination.CORRECTOR_FAILURE
                break
            h = max(step / 2, cfg.h_min)
            continue
        if not (q_lo - 1e-12 <= qn <= q_hi + 1e-12):
            reason = Termination.RANGE_EXIT
            break
        if xn >= -1e-9:
            reason = Termination.LAMBDA_NON_NEGATIVE
            break
        p, q, x = pn, qn, xn
        d, rxx, rq = dn
        pts.append(CriticalPoint(float(p), float(q), float(x), float(rD), float(rDx)))
        slopes.append(_rhs(d))
        streak += 1
        if streak >= 4:
            h = min(1.5 * h, cfg.h_max)
            streak = 0
    return CriticalCurve(pts, reason, direction, slopes, steps, rejected)


def trace(cf: CharacteristicFunction, start, config: TraceConfig | None = None):
    """Follow the critical curve through ``start``.

    Returns one CriticalCurve for ``direction`` +1 or -1 (increasing or
    decreasing p) and a pair ``(backward, forward)`` for ``"both"``; the two
    share the start point.
    """
    cfg = (config or TraceConfig()).resolved(cf.plane)
    if not isinstance(start, CriticalPoint):
        p, q, x = _unpack(start)
        rD, rDx = cf.residuals(x, p, q)
        start = CriticalPoint(p, q, x, float(rD), float(rDx))
    problems = []
    rD, rDx = cf.residuals(start.lam, start.p, start.q)
    if max(rD, rDx) > max(cfg.tol_res, 1e3 * np.finfo(float).eps):
        problems.append(f"start residuals ({rD:.2e}, {rDx:.2e}) exceed tol_res={cfg.tol_res:.1e}")
    if start.lam >= 0:
        problems.append(f"start eigenvalue {start.lam} is not negative")
    _, rxx, rq = _denominators(cf, start.lam, start.p, start.q)
    if rxx < cfg.sing_tol or rq < cfg.sing_tol:
        problems.append(f"start is singular (|D_xx|={rxx:.2e}, |D_q|={rq:.2e}, normalized)")
    if problems:
        raise StartError("; ".join(problems))
    direction = cfg.direction
    if direction in ("both",):
        return _trace_one(cf, start, cfg, -1), _trace_one(cf, start, cfg, +1)
    return _trace_one(cf, start, cfg, int(direction))


def _on_curve(cf, curve, pt, tol):
    """Distance test against the continuous curve, not just its nodes: the
    interpolated guess at ``pt.p`` is projected back onto the manifold."""
    lo, hi = curve.p_span
    if not (lo - tol <= pt.p <= hi + tol):
        return False
    qv, lv = curve.interpolate(np.clip(pt.p, lo, hi))[0]
    if abs(qv - pt.q) <= tol and abs(lv - pt.lam) <= tol:
        return True
    if not lo <= pt.p <= hi:
        return False
    x, q, _, ok, _, _ = cf.correct(pt.p, lv, qv, 1e-10, 20)
    return ok and abs(q - pt.q) <= tol and abs(x - pt.lam) <= tol


def trace_all(cf: CharacteristicFunction, seeds, config: TraceConfig | None = None, *, grid=400,
              dedup_tol=1e-4):
    """Find starts for every seed (a ``{name: value}`` mapping) and trace each both ways.

    Each start yields one joined curve ordered by increasing p (see
    ``CriticalCurve.join``). Starts that already lie on a traced curve are skipped.
    """
    cfg = replace(config or TraceConfig(), direction="both")
    curves = []
    for seed in seeds:
        for pt in find_initial_points(cf, dict(seed), grid=grid):
            if any(_on_curve(cf, c, pt, dedup_tol) for c in curves):
                continue
            try:
                back, fwd = trace(cf, pt, cfg)
            except StartError:
                continue
            curves.append(CriticalCurve.join(back, fwd))
    return curves


@dataclass
class RegionMap:
    p: np.ndarray
    q: np.ndarray
    complex_pairs: np.ndarray  # shape (len(p), len(q))
    real_roots: np.ndarray
    boundary: np.ndarray

    def label(self, n):
        return np.where(self.complex_pairs == 0, "overdamped",
                        np.where(self.complex_pairs < n, "mixed", "underdamped"))


def region_probe(cf: CharacteristicFunction, curves=(), grid=(50, 50), tol_im=1e-7, boundary_tol=1e-6):
    """Spectrum counts on a regular (p, q) grid, flagging nodes that sit on a curve."""
    nps, nqs = (grid, grid) if np.isscalar(grid) else grid
    if nps < 2 or nqs < 2:
        raise ValueError("grid needs at least 2 nodes per axis")
    plane = cf.plane
    P = np.linspace(*plane.p_range, nps)
    Q = np.linspace(*plane.q_range, nqs)
    pairs = np.zeros((nps, nqs), dtype=int)
    reals = np.zeros((nps, nqs), dtype=int)
    for i, p in enumerate(P):
        for j, q in enumerate(Q):
            sc = classify_spectrum(cf, p, q, tol_im)
            pairs[i, j], reals[i, j] = sc.complex_pairs, sc.real_roots
    boundary = np.zeros((nps, nqs), dtype=bool)
    for c in curves:
        qc = c.interpolate(P)[:, 0]
        boundary |= np.abs(Q[None, :] - qc[:, None]) <= boundary_tol
    return RegionMap(P, Q, pairs, reals, boundary)


__all__ = [
    "CriticalCurve", "RegionMap", "SingularityError", "StartError", "Termination", "TraceConfig",
    "ode_rhs", "region_probe", "trace", "trace_all",
]
