"""Polynomial roots, spectrum classification, critical and singular point search.

Critical points solve ``D = D_x = 0`` (a double real root of the
characteristic polynomial). Singular points add a third condition: ``D_xx = 0``
(S2, triple root) or ``D_q = 0`` (S1, fold of q(p)).

Both searches use the same deterministic scheme: sweep a grid of one
coordinate, follow the real negative roots of a derivative polynomial as
branches, bracket sign changes of the remaining residual, bisect, then polish
with Newton on the exact polynomial partials.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, eigvals
from scipy.optimize import linear_sum_assignment

from .charfun import CharacteristicFunction, eval_scale, horner, trim

TOL_IM = 1e-7
DEDUP = 1e-6
POLE_RTOL = 1e-4


class ConvergenceWarning(RuntimeWarning):
    pass


@dataclass
class SpectrumClassification:
    complex_pairs: int
    real_roots: int
    roots: np.ndarray
    near_critical: bool = False
    n: int | None = None

    @property
    def degree(self) -> int:
        return 2 * self.complex_pairs + self.real_roots

    @property
    def label(self) -> str:
        if self.complex_pairs == 0:
            return "overdamped"
        if self.n is not None and self.complex_pairs < self.n:
            return "mixed"
        return "underdamped"


@dataclass(frozen=True)
class CriticalPoint:
    p: float
    q: float
    lam: float
    res_D: float = 0.0
    res_Dx: float = 0.0

    @property
    def residuals(self):
        return (self.res_D, self.res_Dx)


@dataclass(frozen=True)
class SingularPoint:
    kind: str
    x: float
    p: float
    q: float
    residuals: tuple = field(default=(0.0, 0.0, 0.0))


def poly_roots(coeffs) -> np.ndarray:
    """All roots of an ascending-coefficient polynomial.

    Eigenvalues of the companion matrix of the trimmed monic polynomial;
    LAPACK's ``geev`` balances the matrix before the QR iteration.
    """
    c = trim(np.asarray(coeffs, dtype=float))
    if not np.any(c):
        raise ValueError("zero polynomial has no isolated roots")
    d = len(c) - 1
    if d == 0:
        return np.empty(0, dtype=complex)
    comp = np.zeros((d, d))
    comp[1:, :-1] = np.eye(d - 1)
    comp[:, -1] = -c[:-1] / c[-1]
    return np.linalg.eigvals(comp)


def _batched_roots(C):
    """Roots of each row of ``C`` (ascending coefficients), trimmed per row."""
    out = [None] * len(C)
    groups = {}
    for i, row in enumerate(C):
        t = trim(row)
        groups.setdefault(len(t) - 1, []).append((i, t))
    for d, items in groups.items():
        if d <= 0:
            for i, _ in items:
                out[i] = np.empty(0, dtype=complex)
            continue
        rows = np.array([t for _, t in items])
        comp = np.zeros((len(items), d, d))
        comp[:, 1:, :-1] = np.eye(d - 1)
        comp[:, :, -1] = -rows[:, :-1] / rows[:, -1:]
        ev = np.linalg.eigvals(comp)
        for (i, _), r in zip(items, ev):
            out[i] = r
    return out


def real_negative(roots, tol_im=TOL_IM):
    r = np.asarray(roots)
    mask = (np.abs(r.imag) <= tol_im * (1.0 + np.abs(r))) & (r.real < 0)
    return np.sort(r.real[mask])


def linearized_spectrum(model, theta, degree=None) -> np.ndarray:
    """Eigenvalues from a first-order state-space form with internal kernel variables.

    Each kernel ``g(x) C`` with ``C = L S L^T`` (rank r) contributes r internal
    states ``y = g(x) S L^T (x u)``, so the pencil has size ``2n + r`` and its
    finite eigenvalues are exactly the zeros of D. Unlike companion roots of the
    assembled coefficients, nearly coincident real roots far from the origin
    (e.g. around ``-1/nu`` for small ``nu``) stay well resolved.
    ``degree`` caps the count: surplus largest-magnitude eigenvalues belong to
    degenerate (near-viscous) kernels and are dropped.
    """
    n = model.n
    size = 2 * n + sum(model.ranks)
    A = np.zeros((size, size))
    B = np.zeros((size, size))
    A[:n, n:2 * n] = np.eye(n)
    B[:n, :n] = np.eye(n)
    A[n:2 * n, :n] = -model.K
    B[n:2 * n, n:2 * n] = model.M
    off = 2 * n
    for ker, r in zip(model.kernels, model.ranks):
        if r == 0:
            continue
        w, V = eigh(ker.matrix(n, theta))
        idx = np.argsort(-np.abs(w), kind="stable")[:r]
        L, sv = V[:, idx], w[idx]
        blk = slice(off, off + r)
        rel = ker.relax.evaluate(theta)
        A[n:2 * n, blk] = -L
        if ker.form == "nu":
            A[blk, n:2 * n] = sv[:, None] * L.T
            A[blk, blk] = -np.eye(r)
            B[blk, blk] = rel * np.eye(r)
        else:
            A[blk, n:2 * n] = rel * sv[:, None] * L.T
            A[blk, blk] = -rel * np.eye(r)
            B[blk, blk] = np.eye(r)
        off += r
    ev = eigvals(A, B)
    ev = ev[np.isfinite(ev)]
    if degree is not None and len(ev) > degree:
        ev = ev[np.argsort(np.abs(ev), kind="stable")[:degree]]
    return ev


def classify_spectrum(cf: CharacteristicFunction, p, q, tol_im=TOL_IM) -> SpectrumClassification:
    """Split the eigenvalues at (p, q) into conjugate pairs and real roots."""
    roots = linearized_spectrum(cf.model, cf.plane.theta(p, q), cf.degree_check(p, q))
    rel = np.abs(roots.imag) / (1.0 + np.abs(roots))
    real = rel <= tol_im
    nonreal = int((~real).sum())
    near = bool(np.any((~real) & (rel <= 1e3 * tol_im)))
    roots = np.where(real, roots.real + 0j, roots)
    return SpectrumClassification(nonreal // 2, int(real.sum()), roots, near, cf.model.n)


# ---------------------------------------------------------------------------
# generic Newton on subsets of {D and its partials} in subsets of (x, p, q)

_AXIS = {"x": 0, "p": 1, "q": 2}


def _bump(idx, axis):
    j = list(idx)
    j[axis] += 1
    return tuple(j)


def _newton(cf, eqs, unknowns, z, maxit=50, tol=1e-10):
    """Solve ``d[eq] = 0`` for every eq in ``eqs`` over ``unknowns``.

    ``z`` maps 'x', 'p', 'q' to starting values. Returns ``(z, residuals, ok)``.
    """
    z = dict(z)
    mx = max(e[0] for e in eqs) + 1
    mp = max(e[1] for e in eqs) + 1
    mq = max(e[2] for e in eqs) + 1
    axes = [_AXIS[u] for u in unknowns]
    res = [math.inf] * len(eqs)
    step = math.inf
    best, since = math.inf, 0
    for it in range(maxit + 1):
        d = cf.derivatives(z["x"], z["p"], z["q"], mx, mp, mq)
        F = np.array([d[e] for e in eqs])
        CD = cf.coeff_derivs(z["p"], z["q"], mp - 1, mq - 1)
        res = [abs(f) / max(eval_scale(CD[:, e[1], e[2]], z["x"], e[0]), 1e-300)
               for f, e in zip(F, eqs)]
        if not all(math.isfinite(r) for r in res):
            return z, res, False
        mag = 1.0 + sum(abs(z[u]) for u in unknowns)
        if max(res) <= tol and step <= 1e-6 * mag:
            return z, res, True
        if max(res) <= 1e-3 * tol:
            return z, res, True
        # give up once the residual stops shrinking (no root in reach)
        if max(res) < 0.5 * best:
            best, since = max(res), 0
        else:
            since += 1
            if since >= 6 and best > tol:
                return z, res, False
        if it == maxit:
            break
        J = np.array([[d[_bump(e, ax)] for ax in axes] for e in eqs])
        try:
            dz = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            return z, res, False
        if not np.all(np.isfinite(dz)):
            return z, res, False
        for u, s in zip(unknowns, dz):
            z[u] -= s
        step = float(np.abs(dz).sum())
        if step <= 1e-12 * mag and max(res) <= tol:
            break
    return z, res, max(res) <= tol


# ---------------------------------------------------------------------------
# sweeps

def _grid(lo, hi, count):
    if lo > 0 and hi / lo > 100.0:
        return np.geomspace(lo, hi, count)
    return np.linspace(lo, hi, count)


def _point(free, g, fixed_val):
    return (g, fixed_val) if free == "p" else (fixed_val, g)


def _match(xa, xb):
    """Link branches at consecutive grid values.

    Returns ``(pairs, clean)``; ``clean`` is False when some branch starts or
    ends inside the cell or a link is implausibly long.
    """
    if len(xa) == 0 or len(xb) == 0:
        return [], len(xa) == len(xb)
    cost = np.abs(xa[:, None] - xb[None, :]) / (1.0 + np.minimum(np.abs(xa[:, None]), np.abs(xb[None, :])))
    if len(xa) == len(xb):
        # real roots keep their order unless two of them collide
        idx = np.arange(len(xa))
        ok = bool(np.all(cost[idx, idx] < 0.5))
        if ok:
            return list(zip(idx, idx)), True
    ri, ci = linear_sum_assignment(cost)
    pairs = [(i, j) for i, j in zip(ri, ci) if cost[i, j] < 0.5]
    return pairs, False


def _candidates(cf, free, fixed_val, grid, cand_order, resid_eq):
    """Per grid value: real negative roots of d^k D / dx^k and the residual there."""
    P, Q = (grid, np.full_like(grid, fixed_val)) if free == "p" else (np.full_like(grid, fixed_val), grid)
    a, b, c = resid_eq
    CD = cf.coeff_derivs(P, Q, b, c)
    base = CD[..., 0, 0]
    root_polys = base
    for _ in range(cand_order):
        root_polys = root_polys[:, 1:] * np.arange(1, root_polys.shape[1])
    resid_polys = CD[..., b, c]
    for _ in range(a):
        resid_polys = resid_polys[:, 1:] * np.arange(1, resid_polys.shape[1])
    allroots = _batched_roots(root_polys)
    degs = [len(trim(row)) - 1 for row in base]
    xs, fs = [], []
    for i, r in enumerate(allroots):
        x = real_negative(r)
        xs.append(x)
        vals = np.array([horner(resid_polys[i], xi) for xi in x])
        scl = np.array([max(eval_scale(resid_polys[i], xi), 1e-300) for xi in x])
        fs.append(vals / scl if len(x) else vals)
    return xs, fs, degs


def _nearest_root(cf, free, fixed_val, g, cand_order, x_guess):
    p, q = _point(free, g, fixed_val)
    c = cf.coeffs(p, q)
    for _ in range(cand_order):
        c = np.polynomial.polynomial.polyder(c)
    r = real_negative(poly_roots(c)) if np.any(trim(c)[1:]) else np.empty(0)
    if len(r) == 0:
        return None
    return float(r[np.argmin(np.abs(r - x_guess))])


def _sweep_solutions(cf, free, fixed_val, grid, cand_order, resid_eq, tol, bisections=12, depth=8):
    """Solve (resid_eq, d^cand_order D/dx^cand_order) = 0 in (x, free) along a grid.

    Cells where a branch is born or dies (two roots of the derivative
    polynomial colliding) are subdivided recursively, because a sign change can
    hide between the last grid value and the collision.
    """
    xs, fs, degs = _candidates(cf, free, fixed_val, grid, cand_order, resid_eq)
    eqs = [resid_eq, (cand_order, 0, 0)]
    starts = []  # (g, x, cell, speculative)
    for i in range(len(grid)):
        for xi, fi in zip(xs[i], fs[i]):
            if abs(fi) <= 1e-12:
                starts.append((grid[i], xi, None, False))

    def bisect(ga, gb, xa, xb, fa):
        for _ in range(bisections):
            gm = 0.5 * (ga + gb)
            xm = _nearest_root(cf, free, fixed_val, gm, cand_order, 0.5 * (xa + xb))
            if xm is None:
                break
            p, q = _point(free, gm, fixed_val)
            fm = cf.derivatives(xm, p, q, resid_eq[0], resid_eq[1], resid_eq[2])[resid_eq]
            if np.sign(fm) == np.sign(fa):
                ga, xa = gm, xm
            else:
                gb, xb = gm, xm
        return 0.5 * (ga + gb), 0.5 * (xa + xb)

    def cell(ga, gb, xa, fa, xb, fb, level, same_degree):
        pairs, clean = _match(xa, xb)
        # a degree drop at an end sends roots to infinity: not a collision
        clean = clean or not same_degree
        if not clean and level < depth:
            sub = np.linspace(ga, gb, 5)
            sx, sf, _ = _candidates(cf, free, fixed_val, sub[1:-1], cand_order, resid_eq)
            sx, sf = [xa] + sx + [xb], [fa] + sf + [fb]
            for k in range(4):
                cell(sub[k], sub[k + 1], sx[k], sf[k], sx[k + 1], sf[k + 1], level + 1, True)
            return
        for ia, ib in pairs:
            if fa[ia] == 0 or fb[ib] == 0 or np.sign(fa[ia]) == np.sign(fb[ib]):
                continue
            g0, x0 = bisect(ga, gb, xa[ia], xb[ib], fa[ia])
            starts.append((g0, x0, (ga, gb), False))
        if not clean:
            # collision still unresolved at the finest level: try every loose end
            ma = {i for i, _ in pairs}
            mb = {j for _, j in pairs}
            for i in range(len(xa)):
                if i not in ma:
                    starts.append((ga, xa[i], (ga, gb), True))
            for j in range(len(xb)):
                if j not in mb:
                    starts.append((gb, xb[j], (ga, gb), True))

    for i in range(len(grid) - 1):
        cell(grid[i], grid[i + 1], xs[i], fs[i], xs[i + 1], fs[i + 1], 0, degs[i] == degs[i + 1])

    found, dropped = [], []
    for g0, x0, span, speculative in starts:
        p, q = _point(free, g0, fixed_val)
        z, res, ok = _newton(cf, eqs, ("x", free), {"x": x0, "p": p, "q": q}, tol=tol)
        g = z[free]
        if span is not None:
            width = span[1] - span[0]
            ok = ok and span[0] - width <= g <= span[1] + width
        if not ok:
            if not speculative:
                dropped.append((g0, x0))
            continue
        found.append((z, res))
    return found, dropped


def _on_pole(cf, x, p, q, rtol=POLE_RTOL):
    """True when ``x`` sits on a kernel pole, where D vanishes only through the
    polynomializing factor (this happens as the damping tends to zero)."""
    theta = cf.theta(p, q)
    for ker in cf.model.kernels:
        r = abs(ker.relax.evaluate(theta))
        mag = 1.0 + r * abs(x) if ker.form == "nu" else abs(x) + r
        if abs(ker.denominator(x, theta)) <= rtol * mag:
            return True
    return False


def _dedup(items, key, radius=DEDUP):
    out = []
    for it in items:
        k = key(it)
        if all(max(abs(a - b) for a, b in zip(k, key(o))) > radius for o in out):
            out.append(it)
    return out


def find_initial_points(cf: CharacteristicFunction, prescribed: dict, grid=400, tol_res=1e-10):
    """Critical points with one design coordinate prescribed.

    Parameters
    ----------
    prescribed : dict
        ``{p_name: value}`` or ``{q_name: value}`` (plane parameter names), or
        the generic keys ``"p"``/``"q"``.
    grid : int
        Number of sweep values over the free coordinate's range.

    Returns
    -------
    list of CriticalPoint
        Sorted by the free coordinate. Points with ``lam >= 0`` or a negative
        free coordinate are discarded.
    """
    plane = cf.plane
    if len(prescribed) != 1:
        raise ValueError("prescribe exactly one coordinate")
    (name, value), = prescribed.items()
    if name in ("p", plane.p_name):
        free, fixed_val, rng = "q", float(value), plane.q_range
    elif name in ("q", plane.q_name):
        free, fixed_val, rng = "p", float(value), plane.p_range
    else:
        raise ValueError(f"{name!r} is not a design coordinate ({plane.p_name}, {plane.q_name})")
    g = _grid(rng[0], rng[1], grid)
    found, dropped = _sweep_solutions(cf, free, fixed_val, g, 1, (0, 0, 0), tol_res)
    for g0, x0 in dropped:
        warnings.warn(f"Newton polish failed near {free}={g0:.6g}, x={x0:.6g}; point dropped",
                      ConvergenceWarning, stacklevel=2)
    pts = []
    for z, res in found:
        if z["x"] >= 0 or z[free] < -1e-12 or not (rng[0] - 1e-9 <= z[free] <= rng[1] + 1e-9):
            continue
        if _on_pole(cf, z["x"], z["p"], z["q"]):
            continue
        pts.append(CriticalPoint(float(z["p"]), float(z["q"]), float(z["x"]), float(res[0]), float(res[1])))
    pts = _dedup(pts, key=lambda c: (c.lam, c.p if free == "p" else c.q))
    return sorted(pts, key=lambda c: c.p if free == "p" else c.q)


def find_singular_points(cf: CharacteristicFunction, kind="S2", p_grid=200, q_grid=200, tol_res=1e-10):
    """Points where D = D_x = 0 and additionally D_xx = 0 (S2) or D_q = 0 (S1)."""
    if kind == "S2":
        cand_order, inner_eq, third = 2, (1, 0, 0), (2, 0, 0)
    elif kind == "S1":
        cand_order, inner_eq, third = 1, (0, 0, 1), (0, 0, 1)
    else:
        raise ValueError(f"kind must be 'S1' or 'S2', got {kind!r}")
    plane = cf.plane
    ps = _grid(plane.p_range[0], plane.p_range[1], p_grid)
    qs = _grid(plane.q_range[0], plane.q_range[1], q_grid)
    inner_eqs = [inner_eq, (cand_order, 0, 0)]
    full = [(0, 0, 0), (1, 0, 0), third]

    def inner(p):
        found, _ = _sweep_solutions(cf, "q", p, qs, cand_order, inner_eq, tol_res, bisections=8)
        sols = [(z["x"], z["q"]) for z, _ in found if z["x"] < 0]
        sols = _dedup(sols, key=lambda s: s)
        sols.sort()
        xq = np.array(sols).reshape(-1, 2)
        D = np.array([cf.evaluate(x, p, q) / max(eval_scale(cf.coeffs(p, q), x), 1e-300) for x, q in xq])
        return xq, D

    rows = [inner(p) for p in ps]
    starts, loose = [], []
    for i in range(len(ps) - 1):
        (xa, Da), (xb, Db) = rows[i], rows[i + 1]
        pairs = []
        if len(xa) and len(xb):
            scale = 1.0 + np.abs(xa[:, None, :]).max(axis=2)
            cost = np.abs(xa[:, None, :] - xb[None, :, :]).sum(axis=2) / scale
            ri, ci = linear_sum_assignment(cost)
            pairs = [(a, b) for a, b in zip(ri, ci) if cost[a, b] <= 0.5]
        # inner branches born or dying at a fold in p: the sign change of D
        # may sit on the short arc between them, so try Newton from each end
        ma, mb = {a for a, _ in pairs}, {b for _, b in pairs}
        loose += [{"x": xa[a, 0], "p": ps[i], "q": xa[a, 1]} for a in range(len(xa)) if a not in ma]
        loose += [{"x": xb[b, 0], "p": ps[i + 1], "q": xb[b, 1]} for b in range(len(xb)) if b not in mb]
        for a, b in pairs:
            if np.sign(Da[a]) == np.sign(Db[b]):
                continue
            pa, pb = ps[i], ps[i + 1]
            za, zb = xa[a].copy(), xb[b].copy()
            fa = Da[a]
            for _ in range(20):
                pm = 0.5 * (pa + pb)
                zm, _, ok = _newton(cf, inner_eqs, ("x", "q"),
                                    {"x": 0.5 * (za[0] + zb[0]), "p": pm, "q": 0.5 * (za[1] + zb[1])}, tol=tol_res)
                if not ok:
                    break
                fm = cf.evaluate(zm["x"], pm, zm["q"])
                if np.sign(fm) == np.sign(fa):
                    pa, za = pm, np.array([zm["x"], zm["q"]])
                else:
                    pb, zb = pm, np.array([zm["x"], zm["q"]])
            starts.append({"x": 0.5 * (za[0] + zb[0]), "p": 0.5 * (pa + pb), "q": 0.5 * (za[1] + zb[1])})
    out = []
    width = (ps[-1] - ps[0]) / max(len(ps) - 1, 1)
    for z0, speculative in [(z, False) for z in starts] + [(z, True) for z in loose]:
        z, res, ok = _newton(cf, full, ("x", "p", "q"), z0, tol=tol_res)
        if speculative:
            if not ok or abs(z["p"] - z0["p"]) > 2 * width:
                continue
        elif not ok:
            warnings.warn(f"{kind} polish failed near {z0}", ConvergenceWarning, stacklevel=2)
            continue
        inside = (plane.p_range[0] - 1e-9 <= z["p"] <= plane.p_range[1] + 1e-9
                  and plane.q_range[0] - 1e-9 <= z["q"] <= plane.q_range[1] + 1e-9)
        if z["x"] < 0 and z["q"] >= -1e-12 and inside and not _on_pole(cf, z["x"], z["p"], z["q"]):
            out.append(SingularPoint(kind, float(z["x"]), float(z["p"]), float(z["q"]),
                                    tuple(float(r) for r in res)))
    out = _dedup(out, key=lambda s: (s.x, s.p, s.q), radius=1e-6)
    return sorted(out, key=lambda s: s.p)
