"""Lagrangians, quadratic forms and coefficient families.

A :class:`Lagrangian` evaluates a density ``f(x, s, A)`` on stacks of points:
``x`` has shape ``(K, m)``, ``s`` shape ``(K, N)`` and ``A`` shape
``(K, N, m)``; the result has shape ``(K,)``.  Analytic derivatives, when
present, follow the same convention and return ``(K, N)`` and ``(K, N, m)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import StructuralError
from ..numerics import as_matrix

Density = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Lagrangian:
    """Energy density ``f(x, s, A)`` with growth data and optional derivatives.

    ``growth = (c1, c2, p)`` records ``c1 |A|^p <= f <= c2 (1 + |A|^p)``.
    ``nonsmooth`` is an optional predicate returning a boolean mask of sample
    points lying on (or numerically near) the declared non-smooth locus.
    """

    name: str
    m: int
    n_target: int
    eval: Density
    growth: tuple = (0.0, 1.0, 2.0)
    periodic_x: bool = True
    periodic_s: bool = True
    derivative_s: Optional[Callable] = None
    derivative_A: Optional[Callable] = None
    smooth_away_from: str = ""
    nonsmooth: Optional[Callable] = None
    depends_on_x: bool = True
    depends_on_s: bool = True
    quadratic_in_A: bool = False

    @property
    def c1(self) -> float:
        return float(self.growth[0])

    @property
    def c2(self) -> float:
        return float(self.growth[1])

    @property
    def p(self) -> float:
        return float(self.growth[2])

    @property
    def has_derivatives(self) -> bool:
        return self.derivative_A is not None and (self.derivative_s is not None or not self.depends_on_s)

    def __call__(self, x, s, A):
        """Evaluate at a single point or a stack; scalars in, scalar out."""
        A = np.asarray(A, dtype=np.float64)
        single = A.ndim == 2
        x, s, A = self._stack(x, s, A)
        out = self.eval(x, s, A)
        return float(out[0]) if single else out

    def grad_A(self, x, s, A):
        x, s, A = self._stack(x, s, A)
        return self.derivative_A(x, s, A)

    def grad_s(self, x, s, A):
        x, s, A = self._stack(x, s, A)
        if self.derivative_s is None:
            return np.zeros_like(s)
        return self.derivative_s(x, s, A)

    def density(self) -> Callable[[np.ndarray], np.ndarray]:
        """``A -> f(0, 0, A)`` on stacks, for x/s-independent models."""
        def _density(A):
            A = np.asarray(A, dtype=np.float64)
            single = A.ndim == 2
            Ast = A.reshape(-1, self.n_target, self.m)
            k = Ast.shape[0]
            out = self.eval(np.zeros((k, self.m)), np.zeros((k, self.n_target)), Ast)
            return float(out[0]) if single else out
        return _density

    def _stack(self, x, s, A):
        A = np.asarray(A, dtype=np.float64).reshape(-1, self.n_target, self.m)
        k = A.shape[0]
        x = np.asarray(x, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64)
        x = np.broadcast_to(x if x.size == 1 else x.reshape(-1, self.m), (k, self.m))
        s = np.broadcast_to(s if s.size == 1 else s.reshape(-1, self.n_target), (k, self.n_target))
        return np.ascontiguousarray(x), np.ascontiguousarray(s), A


def derivative_check(lag: Lagrangian, points: int = 100, seed: int = 0, step: float = 1e-6) -> float:
    """Worst relative error of the analytic derivatives against central differences.

    Points ``(x, s, A)`` are drawn with ``x`` uniform in the unit cell and
    ``s``, ``A`` standard normal; draws on the declared non-smooth locus are
    rejected.  The error at a point is the max-norm difference divided by
    ``max(1, |analytic|, |difference quotient|)`` in the max norm.
    """
    if not lag.has_derivatives:
        raise StructuralError(f"{lag.name} has no analytic derivatives")
    rng = np.random.default_rng(seed)
    xs, ss, As = [], [], []
    kept = 0
    while kept < points:
        x = rng.uniform(0.0, 1.0, (points, lag.m))
        s = rng.standard_normal((points, lag.n_target))
        A = rng.standard_normal((points, lag.n_target, lag.m))
        ok = np.ones(points, dtype=bool) if lag.nonsmooth is None else ~np.asarray(lag.nonsmooth(x, s, A))
        xs.append(x[ok])
        ss.append(s[ok])
        As.append(A[ok])
        kept += int(ok.sum())
    x = np.concatenate(xs)[:points]
    s = np.concatenate(ss)[:points]
    A = np.concatenate(As)[:points]
    fd = finite_difference_derivatives(replace(lag, derivative_A=None, derivative_s=None), step)
    pairs = [(lag.grad_A(x, s, A).reshape(points, -1), fd.derivative_A(x, s, A).reshape(points, -1))]
    if lag.depends_on_s:
        pairs.append((lag.grad_s(x, s, A), fd.derivative_s(x, s, A)))
    worst = 0.0
    for exact, approx in pairs:
        scale = np.maximum(1.0, np.maximum(np.abs(exact).max(axis=1), np.abs(approx).max(axis=1)))
        worst = max(worst, float(np.max(np.abs(exact - approx).max(axis=1) / scale)))
    return worst


def finite_difference_derivatives(lag: Lagrangian, step: float = 1e-6) -> Lagrangian:
    """Return ``lag`` with central-difference derivative callables filled in."""

    def d_A(x, s, A):
        out = np.empty_like(A)
        for i in range(A.shape[1]):
            for a in range(A.shape[2]):
                Ap = A.copy()
                Am = A.copy()
                Ap[:, i, a] += step
                Am[:, i, a] -= step
                out[:, i, a] = (lag.eval(x, s, Ap) - lag.eval(x, s, Am)) / (2 * step)
        return out

    def d_s(x, s, A):
        out = np.empty_like(s)
        for i in range(s.shape[1]):
            sp = s.copy()
            sm = s.copy()
            sp[:, i] += step
            sm[:, i] -= step
            out[:, i] = (lag.eval(x, sp, A) - lag.eval(x, sm, A)) / (2 * step)
        return out

    return replace(
        lag,
        derivative_A=lag.derivative_A or d_A,
        derivative_s=lag.derivative_s or (d_s if lag.depends_on_s else None),
    )


def oscillating(lag: Lagrangian, eps: float) -> Lagrangian:
    """``f(x/eps, s/eps, A)``: the oscillation is applied by scaling arguments at evaluation time."""
    inv = 1.0 / eps

    def f(x, s, A):
        return lag.eval(x * inv, s * inv, A)

    d_s = None
    if lag.derivative_s is not None:
        def d_s(x, s, A):
            return inv * lag.derivative_s(x * inv, s * inv, A)

    d_A = None
    if lag.derivative_A is not None:
        def d_A(x, s, A):
            return lag.derivative_A(x * inv, s * inv, A)

    nonsmooth = None
    if lag.nonsmooth is not None:
        def nonsmooth(x, s, A):
            return lag.nonsmooth(x * inv, s * inv, A)

    return replace(lag, name=f"{lag.name}@eps={eps:g}", eval=f, derivative_s=d_s, derivative_A=d_A,
                   nonsmooth=nonsmooth, periodic_x=False, periodic_s=False)


def shifted_x(lag: Lagrangian, shift) -> Lagrangian:
    """``f(x + shift, s, A)``; with integer ``shift`` a periodic model is unchanged."""
    shift = np.asarray(shift, dtype=np.float64).reshape(1, lag.m)

    def f(x, s, A):
        return lag.eval(x + shift, s, A)

    d_s = None if lag.derivative_s is None else (lambda x, s, A: lag.derivative_s(x + shift, s, A))
    d_A = None if lag.derivative_A is None else (lambda x, s, A: lag.derivative_A(x + shift, s, A))
    return replace(lag, name=f"{lag.name}+shift", eval=f, derivative_s=d_s, derivative_A=d_A)


# =============================================================================
# quadratic forms
# =============================================================================

@dataclass(frozen=True)
class QuadraticForm:
    """``q(A) = a^{ab} b_{ij} A^i_a A^j_b`` with ``a`` of shape ``(m, m)`` and ``b`` of shape ``(N, N)``."""

    a: np.ndarray
    b: np.ndarray
    isotropic: bool = False

    def __post_init__(self):
        a = as_matrix(self.a)
        b = as_matrix(self.b)
        if a.shape[0] != a.shape[1] or b.shape[0] != b.shape[1]:
            raise StructuralError("a and b must be square")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if self.isotropic:
            scale = b[0, 0]
            if not np.array_equal(b, scale * np.eye(b.shape[0])):
                raise StructuralError("isotropic form needs b = scalar * identity")

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n_target(self) -> int:
        return self.b.shape[0]

    def __call__(self, A) -> np.ndarray:
        A = np.asarray(A, dtype=np.float64)
        return np.einsum("ab,ij,...ia,...jb->...", self.a, self.b, A, A)

    def gradient(self, A) -> np.ndarray:
        A = np.asarray(A, dtype=np.float64)
        return (np.einsum("ab,ij,...jb->...ia", self.a, self.b, A)
                + np.einsum("ab,ij,...ia->...jb", self.a, self.b, A))

    def matrix(self) -> np.ndarray:
        """Symmetric ``(N*m, N*m)`` matrix ``M`` with ``q(A) = vec(A) . M vec(A)``, ``vec`` row-major."""
        full = np.einsum("ab,ij->iajb", self.a, self.b).reshape(self.n_target * self.m, -1)
        return 0.5 * (full + full.T)

    def growth_bounds(self) -> tuple:
        """``(c1, c2)`` from the extreme eigenvalues of :meth:`matrix` (``c1`` clipped at 0)."""
        eig = np.linalg.eigvalsh(self.matrix())
        return max(float(eig[0]), 0.0), max(float(eig[-1]), 0.0)

    def to_lagrangian(self, name: str = "quadratic-form") -> Lagrangian:
        c1, c2 = self.growth_bounds()
        nt, m = self.n_target, self.m

        def f(x, s, A):
            return self(A)

        def d_A(x, s, A):
            return self.gradient(A)

        return Lagrangian(
            name=name, m=m, n_target=nt, eval=f, growth=(c1, c2, 2.0),
            derivative_A=d_A, derivative_s=lambda x, s, A: np.zeros_like(s),
            depends_on_x=False, depends_on_s=False, quadratic_in_A=True,
        )


@dataclass
class CoefficientFamily:
    """Finite stretch of a coefficient sequence ``(a_n, b_n)`` with constant matrices."""

    a_n: Sequence[np.ndarray]
    b_n: Sequence[np.ndarray]
    bound_M: float
    coercivity_c1: float
    modulus_omega: Optional[Callable[[float], float]] = None
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.a_n = [as_matrix(a) for a in self.a_n]
        self.b_n = [as_matrix(b) for b in self.b_n]
        if len(self.a_n) != len(self.b_n) or not self.a_n:
            raise StructuralError("a_n and b_n must be non-empty and of equal length")

    def __len__(self):
        return len(self.a_n)

    def forms(self) -> list:
        return [QuadraticForm(a, b) for a, b in zip(self.a_n, self.b_n)]

    def sup_coefficient(self) -> float:
        return max(max(np.max(np.abs(a)), np.max(np.abs(b))) for a, b in zip(self.a_n, self.b_n))

    def check_bounded(self) -> bool:
        return self.sup_coefficient() <= self.bound_M

    def coercivity_margin(self, samples: int = 200, seed: int = 0) -> float:
        """Smallest ``q_n(A)/|A|^2 - c1`` over members and sampled ``A`` (``>= 0`` means coercive)."""
        rng = np.random.default_rng(seed)
        worst = np.inf
        for q in self.forms():
            A = rng.standard_normal((samples, q.n_target, q.m))
            ratio = q(A) / np.sum(A * A, axis=(1, 2))
            worst = min(worst, float(np.min(ratio)) - self.coercivity_c1)
        return worst
