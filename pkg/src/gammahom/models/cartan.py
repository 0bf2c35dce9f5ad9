"""Cartan integrands, their associated Lagrangians and dominance functions.

Matrices here are ``3 x 2``: columns ``A_1, A_2`` span a surface element in
``R^3`` and ``A_1 ^ A_2`` is its (unnormalised) normal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..numerics import wedge
from ..reports import VerificationReport
from .base import Lagrangian

LOWER_KNEE = 1.0 / 6.0


# =============================================================================
# cutoff functions
# =============================================================================

@dataclass(frozen=True)
class Cutoff:
    """Cutoff ``[0, 1] -> [0, 1]`` with its derivative."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]

    def __call__(self, r):
        return self.fn(np.asarray(r, dtype=np.float64))

    def is_admissible(self, samples: int = 2001) -> bool:
        """``eta(0) = 0``, ``eta(1) = 1`` and ``0 < eta < 1`` strictly inside ``(1/6, 1)``."""
        r = np.linspace(LOWER_KNEE, 1.0, samples)[1:-1]
        vals = self(r)
        return bool(self(0.0) == 0.0 and self(1.0) == 1.0 and np.all(vals > 0) and np.all(vals < 1))


def _ramp(r, lo):
    return np.clip((np.asarray(r, dtype=np.float64) - lo) / (1.0 - lo), 0.0, 1.0)


def smoothstep_quintic(lo: float = LOWER_KNEE) -> Cutoff:
    """``6r^5 - 15r^4 + 10r^3`` on the rescaled ramp ``r = (x - lo)/(1 - lo)``; C^2."""
    def fn(x):
        r = _ramp(x, lo)
        return r * r * r * (r * (6.0 * r - 15.0) + 10.0)

    def deriv(x):
        r = _ramp(x, lo)
        inside = (np.asarray(x) > lo) & (np.asarray(x) < 1.0)
        return np.where(inside, 30.0 * r * r * (r - 1.0) ** 2 / (1.0 - lo), 0.0)

    return Cutoff("smoothstep-quintic", fn, deriv)


def smoothstep_cubic(lo: float = LOWER_KNEE) -> Cutoff:
    def fn(x):
        r = _ramp(x, lo)
        return r * r * (3.0 - 2.0 * r)

    def deriv(x):
        r = _ramp(x, lo)
        inside = (np.asarray(x) > lo) & (np.asarray(x) < 1.0)
        return np.where(inside, 6.0 * r * (1.0 - r) / (1.0 - lo), 0.0)

    return Cutoff("smoothstep-cubic", fn, deriv)


def constant_one() -> Cutoff:
    """Inadmissible control cutoff (``eta(0) = 1``)."""
    return Cutoff("constant-one", lambda x: np.ones_like(np.asarray(x, dtype=np.float64)),
                  lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)))


# =============================================================================
# tau and dominance functions
# =============================================================================

def _columns(A):
    A = np.asarray(A, dtype=np.float64)
    return A[..., :, 0], A[..., :, 1]


def _sq_norm(A):
    # summed per column so that swapping columns is bitwise neutral
    A1, A2 = _columns(A)
    return np.sum(A1 * A1, axis=-1) + np.sum(A2 * A2, axis=-1)


def tau(A):
    """``2|A_1 ^ A_2| / |A|^2``, with ``tau(0) = 1``.  Lies in ``[0, 1]``; equals 1 iff ``A`` is conformal."""
    A1, A2 = _columns(A)
    w = np.linalg.norm(wedge(A1, A2), axis=-1)
    n2 = _sq_norm(A)
    safe = np.where(n2 > 0, n2, 1.0)
    out = np.where(n2 > 0, np.minimum(2.0 * w / safe, 1.0), 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DominanceFunction:
    """2-homogeneous ``g(s, A)`` bounding an associated Cartan Lagrangian from above."""

    g: Callable
    eta: Optional[Cutoff]
    bounds: tuple
    grad_A: Optional[Callable] = None
    name: str = "dominance"

    def __call__(self, s, A):
        return self.g(s, A)


def make_dominance_g(eta: Optional[Cutoff] = None) -> DominanceFunction:
    """``g(s, A) = |A|^2 + |A|^2/2 * (1/2 + eta(tau(A))/2)``; dominates ``3|A_1 ^ A_2|``."""
    eta = eta or smoothstep_quintic()

    def g(s, A):
        A = np.asarray(A, dtype=np.float64)
        n2 = _sq_norm(A)
        return n2 + 0.5 * n2 * (0.5 + 0.5 * eta(tau(A)))

    def grad_A(s, A):
        A = np.asarray(A, dtype=np.float64)
        A1, A2 = _columns(A)
        n2 = _sq_norm(A)
        w = wedge(A1, A2)
        wn = np.linalg.norm(w, axis=-1)
        t = tau(A)
        coef = 1.25 + 0.25 * eta(t)
        safe_n2 = np.where(n2 > 0, n2, 1.0)
        safe_wn = np.where(wn > 0, wn, 1.0)
        what = np.where((wn > 0)[..., None], w / safe_wn[..., None], 0.0)
        dwn1 = np.cross(A2, what)
        dwn2 = np.cross(what, A1)
        dt1 = 2.0 * dwn1 / safe_n2[..., None] - 4.0 * (wn / safe_n2 ** 2)[..., None] * A1
        dt2 = 2.0 * dwn2 / safe_n2[..., None] - 4.0 * (wn / safe_n2 ** 2)[..., None] * A2
        # tau is clipped at 1 and constant at A = 0
        active = ((n2 > 0) & (2.0 * wn < n2))[..., None]
        scale = (0.25 * n2 * eta.deriv(t))[..., None]
        out = 2.0 * coef[..., None, None] * A
        out[..., :, 0] += np.where(active, scale * dt1, 0.0)
        out[..., :, 1] += np.where(active, scale * dt2, 0.0)
        return out

    return DominanceFunction(g=g, eta=eta, bounds=(1.25, 1.5), grad_A=grad_A,
                             name=f"dominance-3norm[{eta.name}]")


def half_norm_dominance() -> DominanceFunction:
    """``g(A) = |A|^2 / 2``, the dominance function of ``Phi(z) = |z|``."""
    return DominanceFunction(
        g=lambda s, A: 0.5 * _sq_norm(A), eta=None, bounds=(0.5, 0.5),
        grad_A=lambda s, A: np.asarray(A, dtype=np.float64).copy(), name="half-norm",
    )


def noneven_dominance() -> DominanceFunction:
    """``g(A) = |A|^2/2 + (A_1 ^ A_2)_3 / 2``, dominating ``Phi(z) = |z| + z_3/2``."""
    def g(s, A):
        A1, A2 = _columns(A)
        return 0.5 * _sq_norm(A) + 0.5 * wedge(A1, A2)[..., 2]

    return DominanceFunction(g=g, eta=None, bounds=(0.25, 0.75), name="noneven-half-norm")


# =============================================================================
# Cartan integrands
# =============================================================================

@dataclass(frozen=True)
class CartanIntegrand:
    """Parametric integrand ``Phi(s, z)``, positively 1-homogeneous in ``z``."""

    phi: Callable
    bounds: tuple
    grad_z: Optional[Callable] = None
    even: bool = False
    name: str = "cartan"

    def __call__(self, s, z):
        return self.phi(s, z)

    def parity_margin(self) -> float:
        """``Phi(e_1) + Phi(-e_1)``."""
        s0 = np.zeros(3)
        e1 = np.array([1.0, 0.0, 0.0])
        return float(self.phi(s0, e1) + self.phi(s0, -e1))

    def associated_lagrangian(self, name: Optional[str] = None, tol: float = 1e-8) -> Lagrangian:
        """``f(s, A) = Phi(s, A_1 ^ A_2)`` on ``3 x 2`` matrices (``m = 2``, ``N = 3``)."""
        phi, grad_z = self.phi, self.grad_z

        def f(x, s, A):
            return phi(s, wedge(A[:, :, 0], A[:, :, 1]))

        d_A = None
        if grad_z is not None:
            def d_A(x, s, A):
                A1, A2 = A[:, :, 0], A[:, :, 1]
                gz = grad_z(s, wedge(A1, A2))
                out = np.empty_like(A)
                out[:, :, 0] = np.cross(A2, gz)
                out[:, :, 1] = np.cross(gz, A1)
                return out

        def nonsmooth(x, s, A):
            w = np.linalg.norm(wedge(A[:, :, 0], A[:, :, 1]), axis=-1)
            return w < tol * np.maximum(1.0, np.sum(A * A, axis=(1, 2)))

        return Lagrangian(
            name=name or f"{self.name}-lagrangian", m=2, n_target=3, eval=f,
            growth=(0.0, 0.5 * self.bounds[1], 2.0), derivative_A=d_A,
            derivative_s=lambda x, s, A: np.zeros_like(s),
            smooth_away_from="A_1 ^ A_2 = 0", nonsmooth=nonsmooth,
            depends_on_x=False, depends_on_s=False,
        )


def _norm_grad(z):
    z = np.asarray(z, dtype=np.float64)
    n = np.linalg.norm(z, axis=-1, keepdims=True)
    return np.where(n > 0, z / np.where(n > 0, n, 1.0), 0.0)


def cartan_norm(scale: float = 1.0) -> CartanIntegrand:
    """Even integrand ``scale * |z|``."""
    return CartanIntegrand(
        phi=lambda s, z: scale * np.linalg.norm(np.asarray(z, dtype=np.float64), axis=-1),
        bounds=(scale, scale), grad_z=lambda s, z: scale * _norm_grad(z), even=True,
        name="cartan-norm" if scale == 1.0 else f"cartan-{scale:g}norm",
    )


def cartan_noneven() -> CartanIntegrand:
    """Non-even integrand ``|z| + z_3/2``, the one dominated by :func:`noneven_dominance`."""
    def phi(s, z):
        z = np.asarray(z, dtype=np.float64)
        return np.linalg.norm(z, axis=-1) + 0.5 * z[..., 2]

    def grad_z(s, z):
        out = _norm_grad(z)
        out[..., 2] += 0.5
        return out

    return CartanIntegrand(phi=phi, bounds=(0.5, 1.5), grad_z=grad_z, even=False, name="cartan-noneven")


def dominance_lagrangian(dom: DominanceFunction, name: Optional[str] = None) -> Lagrangian:
    """Wrap an s-independent dominance function as a Lagrangian (``m = 2``, ``N = 3``)."""
    def f(x, s, A):
        return dom.g(s, A)

    d_A = None
    if dom.grad_A is not None:
        def d_A(x, s, A):
            return dom.grad_A(s, A)

    def nonsmooth(x, s, A):
        A1, A2 = A[:, :, 0], A[:, :, 1]
        w = np.linalg.norm(wedge(A1, A2), axis=-1)
        n2 = np.sum(A * A, axis=(1, 2))
        return (n2 < 1e-12) | (w < 1e-8 * np.maximum(n2, 1.0))

    return Lagrangian(
        name=name or dom.name, m=2, n_target=3, eval=f, growth=(dom.bounds[0], dom.bounds[1], 2.0),
        derivative_A=d_A, derivative_s=lambda x, s, A: np.zeros_like(s),
        smooth_away_from="A = 0 and A_1 ^ A_2 = 0", nonsmooth=nonsmooth,
        depends_on_x=False, depends_on_s=False,
    )


# =============================================================================
# dominance sampling check
# =============================================================================

def _conformal_samples(rng, k):
    A1 = rng.standard_normal((k, 3))
    v = rng.standard_normal((k, 3))
    v -= (np.sum(v * A1, axis=1) / np.sum(A1 * A1, axis=1))[:, None] * A1
    v *= (np.linalg.norm(A1, axis=1) / np.linalg.norm(v, axis=1))[:, None]
    return np.stack([A1, v], axis=-1)


def check_dominance(g: DominanceFunction, phi: CartanIntegrand, samples: int, seed: int,
                    a_offset: Optional[Callable] = None) -> VerificationReport:
    """Sample ``f(s, A) = Phi(s, A_1 ^ A_2) <= g(s, A)`` with equality exactly at conformal ``A``.

    ``a_offset`` optionally adds a bump term to ``g`` (e.g. ``a * H``).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    report = VerificationReport(f"dominance[{g.name} vs {phi.name}]",
                                inputs={"samples": samples, "seed": seed})

    def gval(s, A):
        val = g(s, A)
        return val + a_offset(A) if a_offset is not None else val

    s = rng.standard_normal((samples, 3))
    A = rng.standard_normal((samples, 3, 2))
    f = phi(s, wedge(A[..., 0], A[..., 1]))
    gap = gval(s, A) - f
    report.add("f <= g on random samples", np.all(gap >= -1e-12), float(np.min(gap)))

    Ac = _conformal_samples(rng, samples)
    fc = phi(s, wedge(Ac[..., 0], Ac[..., 1]))
    dev = np.abs(gval(s, Ac) - fc)
    report.add("f == g on conformal samples", np.all(dev <= 1e-9), float(1e-9 - np.max(dev)),
               max_deviation=float(np.max(dev)))

    # random Gaussian pairs are almost surely non-conformal; keep only clearly non-conformal ones
    nonconf = tau(A) < 1.0 - 1e-6
    strict = gap[nonconf]
    report.add("g - f > 0 on non-conformal samples", strict.size > 0 and np.all(strict > 0),
               float(np.min(strict)) if strict.size else -np.inf, count=int(strict.size))
    return report
