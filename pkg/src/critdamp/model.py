"""Linear systems with exponential-kernel (Biot) damping.

The damping matrix in the Laplace domain is a sum of kernels

    G(s) = sum_k g_k(s) C_k

where each kernel has either a relaxation *rate* ``mu`` (``g = mu / (s + mu)``)
or a relaxation *time* ``nu`` (``g = 1 / (1 + nu s)``). The time form is what
the nondimensional presets use: ``nu = 0`` is a purely viscous kernel.

Every scalar entering the damping model is a :class:`Constant` or a
:class:`Ref` to a named parameter, so the parameter vector ``theta`` enters
linearly through bindings.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

SYM_RTOL = 1e-12
RANK_RTOL = 1e-10


class ModelError(ValueError):
    """Invalid model definition. ``problems`` lists every violation found."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class PoleError(ZeroDivisionError):
    """Damping matrix evaluated on a kernel pole."""


@dataclass(frozen=True)
class Constant:
    value: float

    def evaluate(self, theta: Mapping[str, float]) -> float:
        return float(self.value)


@dataclass(frozen=True)
class Ref:
    name: str
    multiplier: float = 1.0

    def evaluate(self, theta: Mapping[str, float]) -> float:
        return self.multiplier * theta[self.name]


ParamBinding = Union[Constant, Ref]


def as_binding(obj) -> ParamBinding:
    """Coerce numbers and parameter names into bindings."""
    if isinstance(obj, (Constant, Ref)):
        return obj
    if isinstance(obj, str):
        return Ref(obj)
    return Constant(float(obj))


@dataclass(frozen=True)
class Kernel:
    """One exponential kernel.

    Parameters
    ----------
    relax : ParamBinding
        Relaxation coefficient. Interpreted as a rate (``form="mu"``) or a
        relaxation time (``form="nu"``).
    C : sequence of ((i, j), ParamBinding)
        Upper-triangle entries (``i <= j``) of the symmetric coefficient
        matrix. Missing entries are zero.
    form : {"nu", "mu"}
    rank_hint : int, optional
        Declared rank of ``C``. Overrides the numerical rank.
    """

    relax: ParamBinding
    C: tuple
    form: str = "nu"
    rank_hint: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "relax", as_binding(self.relax))
        entries = tuple(((int(i), int(j)), as_binding(b)) for (i, j), b in self.C)
        object.__setattr__(self, "C", entries)

    def bindings(self):
        yield self.relax
        for _, b in self.C:
            yield b

    def matrix(self, n: int, theta: Mapping[str, float]) -> np.ndarray:
        out = np.zeros((n, n))
        for (i, j), b in self.C:
            v = b.evaluate(theta)
            out[i, j] += v
            if i != j:
                out[j, i] += v
        return out

    def param_matrix(self, n: int, name: str) -> np.ndarray:
        """Coefficient matrix of parameter ``name`` in ``C`` (d C / d theta)."""
        out = np.zeros((n, n))
        for (i, j), b in self.C:
            if isinstance(b, Ref) and b.name == name:
                out[i, j] += b.multiplier
                if i != j:
                    out[j, i] += b.multiplier
        return out

    def uses_in_relax(self, name: str) -> bool:
        return isinstance(self.relax, Ref) and self.relax.name == name

    def factor(self, s, theta):
        """Scalar kernel factor g_k(s)."""
        r = self.relax.evaluate(theta)
        if self.form == "nu":
            den = 1.0 + r * s
            if den == 0:
                raise PoleError(f"s={s} is a pole of kernel with nu={r}")
            return 1.0 / den
        den = s + r
        if den == 0:
            raise PoleError(f"s={s} is a pole of kernel with mu={r}")
        return r / den

    def denominator(self, s, theta):
        """Polynomial that clears this kernel's pole: 1 + nu s, or s + mu."""
        r = self.relax.evaluate(theta)
        return 1.0 + r * s if self.form == "nu" else s + r


def _reference_theta(names):
    # deterministic, generic (no accidental cancellations) values for rank probing
    rng = np.random.default_rng(12345)
    return {nm: float(v) for nm, v in zip(names, rng.uniform(0.5, 1.5, len(names)))}


def numerical_rank(C: np.ndarray, rank_hint=None, rtol=RANK_RTOL) -> int:
    if rank_hint is not None:
        return int(rank_hint)
    w = np.abs(np.linalg.eigvalsh(C))
    norm = w.max() if w.size else 0.0
    if norm == 0.0:
        return 0
    small = w <= rtol * norm
    # eigenvalues in the gray zone around the threshold make the rank unreliable
    gray = (w > 1e-2 * rtol * norm) & (w < 1e2 * rtol * norm)
    if gray.any():
        raise ModelError("numerically ambiguous rank of a damping matrix; provide rank_hint")
    return int((~small).sum())


@dataclass(frozen=True)
class ViscoelasticModel:
    """Mass and stiffness matrices plus a list of damping kernels."""

    M: np.ndarray
    K: np.ndarray
    kernels: tuple
    param_names: tuple
    ranks: tuple = field(init=False)

    def __post_init__(self):
        M = np.array(self.M, dtype=float)
        K = np.array(self.K, dtype=float)
        M.setflags(write=False)
        K.setflags(write=False)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "kernels", tuple(self.kernels))
        object.__setattr__(self, "param_names", tuple(self.param_names))
        problems = validate(self)
        if problems:
            raise ModelError(problems)
        theta = _reference_theta(self.param_names)
        ranks = []
        for k, ker in enumerate(self.kernels):
            ranks.append(numerical_rank(ker.matrix(self.n, theta), ker.rank_hint))
        object.__setattr__(self, "ranks", tuple(ranks))

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def N(self) -> int:
        return len(self.kernels)

    @property
    def r(self) -> int:
        return sum(self.ranks)

    @property
    def degree(self) -> int:
        return 2 * self.n + self.r

    def damping_matrices(self, theta):
        return [ker.matrix(self.n, theta) for ker in self.kernels]

    def natural_scale(self) -> float:
        """Square root of the largest eigenvalue of K against M (1 if K = 0)."""
        from scipy.linalg import eigh

        w = eigh(self.K, self.M, eigvals_only=True)
        top = float(w.max()) if w.size else 0.0
        return float(np.sqrt(top)) if top > 0 else 1.0


def _symmetry_problems(name, A):
    problems = []
    scale = max(np.abs(A).max(), 1e-300)
    for i in range(A.shape[0]):
        for j in range(i + 1, A.shape[0]):
            if abs(A[i, j] - A[j, i]) > SYM_RTOL * scale:
                problems.append(f"{name} not symmetric: {name}[{i}][{j}]={A[i, j]!r} vs {name}[{j}][{i}]={A[j, i]!r}")
    return problems


def validate(model: ViscoelasticModel) -> list:
    """Return every invariant violation of ``model`` (empty list when valid)."""
    problems = []
    M, K = model.M, model.K
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        return [f"M must be a square nonempty matrix, got shape {M.shape}"]
    n = M.shape[0]
    if K.shape != (n, n):
        return [f"K must have shape {(n, n)}, got {K.shape}"]
    problems += _symmetry_problems("M", M)
    problems += _symmetry_problems("K", K)
    if not problems:
        try:
            np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            problems.append("M is not positive definite")
        w = np.linalg.eigvalsh(K)
        if w.min() < -1e-12 * max(np.abs(K).max(), 1e-300):
            problems.append(f"K is not positive semidefinite (min eigenvalue {w.min():.3e})")
    if len(set(model.param_names)) != len(model.param_names):
        problems.append("duplicate parameter names")
    if not model.kernels:
        problems.append("at least one kernel is required")
    for k, ker in enumerate(model.kernels):
        if ker.form not in ("nu", "mu"):
            problems.append(f"kernels[{k}].form must be 'nu' or 'mu', got {ker.form!r}")
        if isinstance(ker.relax, Ref) and ker.relax.name not in model.param_names:
            problems.append(f"kernels[{k}].relax references unknown parameter {ker.relax.name!r}")
        if isinstance(ker.relax, Constant) and ker.relax.value < 0:
            problems.append(f"kernels[{k}].relax is negative ({ker.relax.value})")
        for (i, j), b in ker.C:
            if not (0 <= i <= j < n):
                problems.append(f"kernels[{k}].C entry ({i}, {j}) is not in the upper triangle of a {n}x{n} matrix")
            if isinstance(b, Ref) and b.name not in model.param_names:
                problems.append(f"kernels[{k}].C[{i}][{j}] references unknown parameter {b.name!r}")
    return problems


@dataclass(frozen=True)
class DesignPlane:
    """Two free design parameters ``(p, q)``; every other parameter is fixed."""

    p_name: str
    q_name: str
    fixed: Mapping[str, float]
    p_range: tuple
    q_range: tuple

    def __post_init__(self):
        object.__setattr__(self, "fixed", dict(self.fixed))
        object.__setattr__(self, "p_range", tuple(float(v) for v in self.p_range))
        object.__setattr__(self, "q_range", tuple(float(v) for v in self.q_range))
        problems = []
        if self.p_name == self.q_name:
            problems.append("p and q must be different parameters")
        if not self.p_range[0] < self.p_range[1]:
            problems.append(f"empty p range {self.p_range}")
        if not self.q_range[0] < self.q_range[1]:
            problems.append(f"empty q range {self.q_range}")
        if self.q_range[0] < 0:
            problems.append(f"q range must be nonnegative, got {self.q_range}")
        if problems:
            raise ModelError(problems)

    def check(self, model: ViscoelasticModel):
        problems = []
        for nm in (self.p_name, self.q_name):
            if nm not in model.param_names:
                problems.append(f"design parameter {nm!r} is not a model parameter")
        for nm in model.param_names:
            if nm not in (self.p_name, self.q_name) and nm not in self.fixed:
                problems.append(f"parameter {nm!r} is neither free nor fixed")
        for k, ker in enumerate(model.kernels):
            if isinstance(ker.relax, Ref):
                nm, mult = ker.relax.name, ker.relax.multiplier
                lo = {self.p_name: self.p_range[0], self.q_name: self.q_range[0]}.get(nm, self.fixed.get(nm))
                hi = {self.p_name: self.p_range[1], self.q_name: self.q_range[1]}.get(nm, self.fixed.get(nm))
                if lo is not None and min(mult * lo, mult * hi) < 0:
                    problems.append(f"kernels[{k}] relaxation coefficient can become negative through {nm!r}")
        for nm in self.fixed:
            if nm not in model.param_names:
                problems.append(f"fixed value given for unknown parameter {nm!r}")
            elif nm in (self.p_name, self.q_name):
                problems.append(f"parameter {nm!r} is both free and fixed")
        if problems:
            raise ModelError(problems)

    def theta(self, p: float, q: float) -> dict:
        out = dict(self.fixed)
        out[self.p_name] = float(p)
        out[self.q_name] = float(q)
        return out

    def replace(self, **changes) -> "DesignPlane":
        from dataclasses import replace

        return replace(self, **changes)


def eval_damping_matrix(model: ViscoelasticModel, s, theta) -> np.ndarray:
    """Laplace-domain damping matrix ``G(s) = sum_k g_k(s) C_k``."""
    G = np.zeros((model.n, model.n), dtype=complex if np.iscomplexobj(s) else float)
    for ker in model.kernels:
        G = G + ker.factor(s, theta) * ker.matrix(model.n, theta)
    return G


def dynamic_stiffness(model: ViscoelasticModel, s, theta) -> np.ndarray:
    """``s^2 M + s G(s) + K``."""
    return s * s * model.M + s * eval_damping_matrix(model, s, theta) + model.K


def max_param_count(model: ViscoelasticModel) -> int:
    """Number of independent damping parameters of the most general model."""
    n, N = model.n, model.N
    return N + N * n * (n + 1) // 2


def _scalar_C(binding):
    return (((0, 0), binding),)


CHAIN_K = np.array([[2.0, -1, 0, 0], [-1, 2, -1, 0], [0, -1, 2, -1], [0, 0, -1, 2]])
CHAIN_C = np.array([[0.0, 0, 0, 0], [0, 1, -1, 0], [0, -1, 2, -1], [0, 0, -1, 1]])


def builtin_model(preset_id: str):
    """Nondimensional example systems, returned as ``(model, default_plane)``.

    ``sdof1k``
        One dof, one kernel: ``x^2 + 2 zeta x / (1 + nu x) + 1``.
    ``sdof2k``
        One dof, two kernels sharing one damping coefficient:
        ``x^2 + zeta x (1/(1 + nu1 x) + 1/(1 + nu2 x)) + 1``.
    ``chain4dof``
        Four masses in a fixed-fixed spring chain with one kernel acting on
        the three right-hand masses.
    """
    if preset_id == "sdof1k":
        model = ViscoelasticModel(
            M=[[1.0]], K=[[1.0]],
            kernels=[Kernel(Ref("nu"), _scalar_C(Ref("zeta", 2.0)))],
            param_names=("nu", "zeta"),
        )
        plane = DesignPlane("nu", "zeta", {}, (0.0, 0.25), (0.0, 4.0))
    elif preset_id == "sdof2k":
        model = ViscoelasticModel(
            M=[[1.0]], K=[[1.0]],
            kernels=[
                Kernel(Ref("nu1"), _scalar_C(Ref("zeta"))),
                Kernel(Ref("nu2"), _scalar_C(Ref("zeta"))),
            ],
            param_names=("nu1", "nu2", "zeta"),
        )
        plane = DesignPlane("zeta", "nu2", {"nu1": 0.0}, (0.0, 10.0), (0.0, 2.5))
    elif preset_id == "chain4dof":
        C = tuple(
            ((i, j), Ref("zeta", 2.0 * CHAIN_C[i, j]))
            for i in range(4) for j in range(i, 4) if CHAIN_C[i, j] != 0
        )
        model = ViscoelasticModel(
            M=np.eye(4), K=CHAIN_K,
            kernels=[Kernel(Ref("nu"), C)],
            param_names=("nu", "zeta"),
        )
        plane = DesignPlane("zeta", "nu", {}, (0.0, 3.0), (0.0, 0.25))
    else:
        raise KeyError(f"unknown preset {preset_id!r}; choose from {', '.join(PRESETS)}")
    plane.check(model)
    return model, plane


PRESETS = ("sdof1k", "sdof2k", "chain4dof")
