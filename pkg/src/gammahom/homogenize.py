"""Homogenized density estimates from cell solves, and probes of their convexity properties."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .cell import CellProblem, CellSolution, SolveConfig, minimize
from .errors import ParameterError, StructuralError
from .models.base import Lagrangian, oscillating
from .numerics import Grid, GridField, as_matrix, gradient_at_cells
from .reports import VerificationReport

FIT_MODEL = "g_t ~ f_hom + C/t least-squares"


@dataclass(frozen=True)
class HomSchedule:
    """Cell sizes to solve at, with a nodes-per-unit-length resolution rule.

    ``resolution`` may override the rule with a callable ``t -> nodes_per_side``.
    """

    t_values: tuple
    nodes_per_unit: int = 32
    solve_config: SolveConfig = SolveConfig()
    resolution: Optional[Callable[[float], int]] = None

    def __post_init__(self):
        t = tuple(float(v) for v in self.t_values)
        object.__setattr__(self, "t_values", t)
        if len(t) < 2:
            raise ParameterError("a schedule needs at least two cell sizes")
        if any(v <= 0 for v in t) or any(b <= a for a, b in zip(t, t[1:])):
            raise ParameterError("t_values must be positive and strictly increasing")
        if self.nodes_per_unit < 1:
            raise ParameterError("nodes_per_unit must be positive")

    def grid(self, m: int, t: float) -> Grid:
        if self.resolution is not None:
            return Grid(m, float(t), int(self.resolution(t)))
        return Grid.with_resolution(m, t, self.nodes_per_unit)


@dataclass
class HomResult:
    Y: np.ndarray
    t_values: np.ndarray
    g_t_estimates: np.ndarray
    f_hom_estimate: float
    fit_slope: float
    fit_residual: float
    model: str = FIT_MODEL
    quality_flags: list = field(default_factory=list)
    solutions: list = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return not self.quality_flags

    def rows(self) -> list:
        """One ``(t, energy, converged, iterations)`` row per cell size."""
        return [
            (float(t), float(g), bool(sol.converged), int(sol.iterations_used))
            for t, g, sol in zip(self.t_values, self.g_t_estimates, self.solutions)
        ]

    def to_record(self) -> dict:
        return {
            "Y": self.Y.tolist(),
            "f_hom_estimate": self.f_hom_estimate,
            "fit_slope": self.fit_slope,
            "fit_residual": self.fit_residual,
            "model": self.model,
            "quality_flags": list(self.quality_flags),
            "rows": [dict(zip(("t", "energy", "converged", "iterations"), r)) for r in self.rows()],
        }


def fit_inverse_t(t_values, g_values) -> tuple:
    """Least-squares fit ``g = a + b/t``; returns ``(a, b, residual_norm)``."""
    t = np.asarray(t_values, dtype=np.float64)
    g = np.asarray(g_values, dtype=np.float64)
    design = np.column_stack([np.ones_like(t), 1.0 / t])
    coef, *_ = np.linalg.lstsq(design, g, rcond=None)
    resid = g - design @ coef
    return float(coef[0]), float(coef[1]), float(np.linalg.norm(resid))


def _check_periodic(lag: Lagrangian):
    if lag.depends_on_x and not lag.periodic_x:
        raise StructuralError(f"{lag.name} is not periodic in x")
    if lag.depends_on_s and not lag.periodic_s:
        raise StructuralError(f"{lag.name} is not periodic in s")


def _growth_flags(lag: Lagrangian, Y: np.ndarray, estimate: float, tol: float) -> list:
    norm_p = float(np.linalg.norm(Y)) ** lag.p
    flags = []
    if estimate < lag.c1 * norm_p - tol:
        flags.append("growth_lower_bound_violated")
    if estimate > lag.c2 * (1.0 + norm_p) + tol:
        flags.append("growth_upper_bound_violated")
    return flags


def estimate_f_hom(lagrangian: Lagrangian, Y, schedule: HomSchedule) -> HomResult:
    """Solve the cell problem at each scheduled ``t`` and extrapolate ``t -> inf``."""
    _check_periodic(lagrangian)
    Y = as_matrix(Y, lagrangian.n_target, lagrangian.m)
    solutions = []
    flags = []
    for t in schedule.t_values:
        problem = CellProblem(lagrangian, Y, t, schedule.grid(lagrangian.m, t))
        sol = minimize(problem, schedule.solve_config)
        if not sol.converged:
            flags.append(f"not_converged@t={t:g}")
        solutions.append(sol)
    g = np.array([s.energy for s in solutions])
    intercept, slope, resid = fit_inverse_t(schedule.t_values, g)
    tol = resid + 1e-8 * max(1.0, abs(intercept))
    flags.extend(_growth_flags(lagrangian, Y, intercept, tol))
    return HomResult(
        Y=Y, t_values=np.array(schedule.t_values), g_t_estimates=g, f_hom_estimate=intercept,
        fit_slope=slope, fit_residual=resid, quality_flags=flags, solutions=solutions,
    )


# =============================================================================
# convexity probes
# =============================================================================

def _eval_density(density, A: np.ndarray) -> np.ndarray:
    """Evaluate on a stack ``(K, N, m)``; falls back to a loop for scalar-only callables."""
    out = np.asarray(density(A), dtype=np.float64)
    if out.shape == (A.shape[0],):
        return out
    return np.array([float(density(a)) for a in A])


def _hat_field(grid: Grid, components: int, rng: np.random.Generator) -> GridField:
    """Random piecewise-affine bump: a sup-norm tent on a random sub-box times a random vector."""
    m = grid.dim
    x = grid.node_coords().reshape(-1, m)
    center = rng.uniform(0.25, 0.75, size=m)
    radius = rng.uniform(0.1, 0.25, size=m)
    profile = np.clip(1.0 - np.max(np.abs(x - center) / radius, axis=1), 0.0, None)
    amp = rng.standard_normal(components) * rng.uniform(0.1, 1.0)
    vals = profile[:, None] * amp[None, :]
    return GridField(grid, components, vals).with_zero_boundary()


def _noise_field(grid: Grid, components: int, rng: np.random.Generator) -> GridField:
    vals = rng.standard_normal((grid.n_nodes, components)) * rng.uniform(0.01, 0.3)
    return GridField(grid, components, vals).with_zero_boundary()


def quasiconvexity_probe(density, Y, samples: int = 32, seed: int = 0, nodes_per_side: int = 8) -> float:
    """Most negative Jensen gap ``mean(density(Y + D phi)) - density(Y)`` over seeded test fields.

    A value ``>= -tol`` means no violation was found at tolerance ``tol``; it
    does not certify quasiconvexity.
    """
    Y = as_matrix(Y)
    N, m = Y.shape
    grid = Grid(m, 1.0, nodes_per_side)
    rng = np.random.default_rng(seed)
    base = float(_eval_density(density, Y[None])[0])
    worst = np.inf
    for k in range(samples):
        fld = _hat_field(grid, N, rng) if k % 2 == 0 else _noise_field(grid, N, rng)
        grads = gradient_at_cells(fld).reshape(-1, N, m)
        gap = float(np.mean(_eval_density(density, Y[None] + grads))) - base
        worst = min(worst, gap)
    return worst


def rank_one_probe(density, Y, directions: int = 16, seed: int = 0, span: float = 1.0,
                   points: int = 9, step: float = 0.1) -> float:
    """Most negative centred second difference along seeded lines ``Y + tau a (x) b``.

    ``a`` and ``b`` are unit vectors, so a quadratic density ``|A|^2`` gives
    exactly ``2``.
    """
    Y = as_matrix(Y)
    N, m = Y.shape
    rng = np.random.default_rng(seed)
    taus = np.linspace(-span, span, points)
    worst = np.inf
    for _ in range(directions):
        a = rng.standard_normal(N)
        b = rng.standard_normal(m)
        R = np.outer(a / np.linalg.norm(a), b / np.linalg.norm(b))
        stack = np.concatenate([Y[None] + (taus + shift)[:, None, None] * R for shift in (-step, 0.0, step)])
        vals = _eval_density(density, stack).reshape(3, points)
        second = (vals[0] - 2.0 * vals[1] + vals[2]) / (step * step)
        worst = min(worst, float(np.min(second)))
    return worst


# =============================================================================
# symmetry and oscillation comparisons
# =============================================================================

def swap_columns(Y, perm: Sequence[int] = (0, 1)) -> np.ndarray:
    """Exchange two columns of ``Y`` (``perm = (i, i)`` is the identity)."""
    Y = as_matrix(Y).copy()
    i, j = perm
    Y[:, [i, j]] = Y[:, [j, i]]
    return Y


def permutation_symmetry_check(lagrangian: Lagrangian, Y, schedule: HomSchedule,
                               perm: Sequence[int] = (0, 1), tolerance: float = 0.02) -> VerificationReport:
    """Compare homogenized estimates at ``Y`` and at ``Y`` with two columns exchanged."""
    Y = as_matrix(Y, lagrangian.n_target, lagrangian.m)
    report = VerificationReport("permutation-symmetry", inputs={"model": lagrangian.name, "perm": list(perm)})
    first = estimate_f_hom(lagrangian, Y, schedule)
    if perm[0] == perm[1]:
        second = first
    else:
        second = estimate_f_hom(lagrangian, swap_columns(Y, perm), schedule)
    diff = abs(first.f_hom_estimate - second.f_hom_estimate)
    allowed = first.fit_residual + second.fit_residual + tolerance * max(
        abs(first.f_hom_estimate), abs(second.f_hom_estimate))
    report.add("estimates at Y and at permuted Y agree within combined residual + relative tolerance",
               diff <= allowed, allowed - diff, estimate=first.f_hom_estimate,
               estimate_permuted=second.f_hom_estimate, difference=diff, allowed=allowed)
    for label, res in (("Y", first), ("permuted Y", second)):
        report.add(f"solver quality at {label}", res.ok, 0.0 if res.ok else -1.0, flags=list(res.quality_flags))
    report.inputs["results"] = [first.to_record(), second.to_record()]
    return report


@dataclass
class SweepResult:
    epsilons: np.ndarray
    energies: np.ndarray
    f_hom_estimate: float
    relative_gap: float
    passed: bool
    quality_flags: list = field(default_factory=list)
    solutions: list = field(default_factory=list, repr=False)

    def rows(self) -> list:
        return [(float(e), float(g), bool(s.converged), int(s.iterations_used))
                for e, g, s in zip(self.epsilons, self.energies, self.solutions)]

    def to_record(self) -> dict:
        return {
            "f_hom_estimate": self.f_hom_estimate,
            "relative_gap": self.relative_gap,
            "passed": self.passed,
            "quality_flags": list(self.quality_flags),
            "rows": [dict(zip(("epsilon", "energy", "converged", "iterations"), r)) for r in self.rows()],
        }


def epsilon_sweep_compare(lagrangian: Lagrangian, Y, epsilons, schedule: HomSchedule,
                          f_hom: Optional[float] = None, tolerance: float = 0.03) -> SweepResult:
    """Dirichlet minima of the ``eps``-oscillating energy on the unit cube against the estimate.

    Each ``eps`` uses ``schedule.nodes_per_unit`` nodes per oscillation
    period, so the grid has ``nodes_per_unit / eps`` nodes per side.
    Passes iff the smallest ``eps`` lands within ``tolerance`` (relative) of
    the homogenized value.
    """
    eps = np.asarray(epsilons, dtype=np.float64)
    if eps.ndim != 1 or eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ParameterError("epsilons must be positive and strictly decreasing")
    Y = as_matrix(Y, lagrangian.n_target, lagrangian.m)
    flags = []
    if f_hom is None:
        est = estimate_f_hom(lagrangian, Y, schedule)
        f_hom = est.f_hom_estimate
        flags.extend(est.quality_flags)
    solutions = []
    for e in eps:
        nodes = schedule.nodes_per_unit / e
        if abs(nodes - round(nodes)) > 1e-9:
            raise ParameterError(f"eps = {e} does not give an integer node count")
        grid = Grid(lagrangian.m, 1.0, int(round(nodes)))
        sol = minimize(CellProblem(oscillating(lagrangian, float(e)), Y, 1.0, grid), schedule.solve_config)
        if not sol.converged:
            flags.append(f"not_converged@eps={e:g}")
        solutions.append(sol)
    energies = np.array([s.energy for s in solutions])
    gap = abs(energies[-1] - f_hom) / max(abs(f_hom), np.finfo(float).tiny)
    return SweepResult(eps, energies, float(f_hom), float(gap), bool(gap <= tolerance), flags, solutions)


# =============================================================================
# quadratic homogenized densities
# =============================================================================

def estimate_quadratic_f_hom(lagrangian: Lagrangian, schedule: HomSchedule) -> tuple:
    """Homogenized matrix of a density quadratic in ``A``, recovered by polarization.

    Returns ``(M, results)`` with ``f_hom(A) = vec(A) . M vec(A)`` (row-major
    ``vec``) and the individual :class:`HomResult` objects.
    """
    if not lagrangian.quadratic_in_A:
        raise StructuralError(f"{lagrangian.name} is not declared quadratic in A")
    N, m = lagrangian.n_target, lagrangian.m
    dim = N * m
    basis = np.eye(dim).reshape(dim, N, m)
    diag = []
    results = []
    for i in range(dim):
        res = estimate_f_hom(lagrangian, basis[i], schedule)
        diag.append(res.f_hom_estimate)
        results.append(res)
    M = np.diag(diag)
    for i in range(dim):
        for j in range(i + 1, dim):
            res = estimate_f_hom(lagrangian, basis[i] + basis[j], schedule)
            results.append(res)
            M[i, j] = M[j, i] = 0.5 * (res.f_hom_estimate - diag[i] - diag[j])
    return M, results


def quadratic_density(M: np.ndarray, n_target: int, m: int) -> Callable[[np.ndarray], np.ndarray]:
    """``A -> vec(A) . M vec(A)`` on stacks ``(K, N, m)``."""
    M = np.asarray(M, dtype=np.float64)

    def density(A):
        v = np.asarray(A, dtype=np.float64).reshape(-1, n_target * m)
        return np.einsum("ki,ij,kj->k", v, M, v)

    return density


def harmonic_mean(values, weights=None) -> float:
    """Weighted harmonic mean, the 1D layered oracle."""
    v = np.asarray(values, dtype=np.float64)
    w = np.full(v.shape, 1.0 / v.size) if weights is None else np.asarray(weights, dtype=np.float64)
    return float(math.fsum(w) / math.fsum(w / v))
