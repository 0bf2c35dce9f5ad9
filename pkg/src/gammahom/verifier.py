"""Mechanical checks of the counterexamples' algebraic and geometric cores."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from . import _kernels
from .errors import StructuralError
from .models.base import CoefficientFamily, Lagrangian, QuadraticForm
from .models.builtin import make_swap_anisotropic
from .models.bump import PROBE_D, BumpH, build_bump_H
from .models.cartan import (
    CartanIntegrand,
    DominanceFunction,
    cartan_noneven,
    cartan_norm,
    constant_one,
    dominance_lagrangian,
    half_norm_dominance,
    make_dominance_g,
    smoothstep_cubic,
    smoothstep_quintic,
)
from .numerics import Grid, GridField, wedge
from .reports import VerificationReport

SQRT2 = math.sqrt(2.0)


class StructuralWarning(UserWarning):
    """A constraint system has unknowns that no constraint references."""


# =============================================================================
# relative density
# =============================================================================

IRRATIONAL_FREQUENCIES = np.array([[1.0, 1.0], [SQRT2, SQRT2]])


def _is_integer(x: float, tol: float = 0.0) -> bool:
    return abs(x - round(x)) <= tol


def almost_period_member(tau, Y=IRRATIONAL_FREQUENCIES) -> bool:
    """Whether ``Y tau`` is an integer vector.

    For the built-in ``Y`` (rows ``(1,1)`` and ``(sqrt2, sqrt2)``) with integer
    ``tau`` this holds exactly when ``tau_1 + tau_2 = 0``, since ``sqrt2 k`` is
    never an integer for a non-zero integer ``k``; that case is decided
    symbolically.
    """
    tau = [Fraction(v) for v in tau]
    if np.array_equal(np.asarray(Y, dtype=float), IRRATIONAL_FREQUENCIES):
        total = tau[0] + tau[1]
        return total == 0
    vec = np.asarray(Y, dtype=np.float64) @ np.array([float(v) for v in tau])
    return all(_is_integer(v, 1e-12) for v in vec)


def relative_density_check(Y=IRRATIONAL_FREQUENCIES, eta: float = 0.5,
                           inclusion_length: float = 1.0) -> VerificationReport:
    """The almost-period set ``{tau_1 = -tau_2}`` misses ``(2L, 2L) - [0, L)^2``."""
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    L = Fraction(inclusion_length)
    if L <= 0:
        raise ValueError("inclusion_length must be positive")
    rep = VerificationReport("relative-density", inputs={"eta": eta, "L": float(L)})
    for tau, expect in (((1, -1), True), ((1, 0), False), ((5, -5), True)):
        got = almost_period_member(tau, Y)
        rep.add(f"membership of tau={tau} is {expect}", got == expect, 0.0 if got == expect else -1.0,
                tau=list(tau), member=got)
    # x = tau + y, tau = (c, -c), y in [0,L)^2:
    # y1 = 2L - c in [0, L) gives c in (L, 2L]; y2 = 2L + c in [0, L) gives c in [-2L, -L)
    first = (L, 2 * L)
    second = (-2 * L, -L)
    gap = first[0] - second[1]
    rep.add(f"probe ({2 * L}, {2 * L}) is not covered by T + [0,L)^2", gap > 0, float(gap),
            c_range_from_y1=[float(v) for v in first], c_range_from_y2=[float(v) for v in second])
    return rep


# =============================================================================
# coordinate-swap contradictions
# =============================================================================

SWAP_MODES = ("iso", "bild", "urbild", "dom")


def _is_scalar_identity(M: np.ndarray) -> bool:
    return bool(np.array_equal(M, M[0, 0] * np.eye(M.shape[0])))


def _check_family_mode(family: CoefficientFamily, mode: str):
    if mode not in SWAP_MODES:
        raise StructuralError(f"unknown swap mode {mode!r}")
    for a, b in zip(family.a_n, family.b_n):
        if a.shape != (2, 2):
            raise StructuralError("swap demos need m = 2")
        if mode in ("iso", "dom") and not (_is_scalar_identity(a) and _is_scalar_identity(b)):
            raise StructuralError(f"mode {mode!r} needs isotropic members (scalar a and b)")
        if mode == "bild" and not _is_scalar_identity(a):
            raise StructuralError("mode 'bild' needs a_n = scalar * identity")
        if mode == "urbild" and not _is_scalar_identity(b):
            raise StructuralError("mode 'urbild' needs b_n = scalar * identity")


def _affine_field(grid: Grid, M: np.ndarray) -> GridField:
    return GridField.from_function(grid, lambda x: x @ M.T, M.shape[0])


def _quadrature(lag: Lagrangian, fld: GridField) -> float:
    grad, mid = _kernels.gather_numpy(fld.nodal(), fld.grid.spacing)
    x = fld.grid.cell_midpoints().reshape(-1, fld.grid.dim)
    vals = lag.eval(x, mid.reshape(-1, fld.components), grad.reshape(-1, fld.components, fld.grid.dim))
    return math.fsum(vals) * fld.grid.cell_volume / fld.grid.side_length ** fld.grid.dim


def _riemannian_energy(a: np.ndarray, b: np.ndarray, nodal: np.ndarray, h: float) -> float:
    """``int a^{ab} b_ij v^i_a v^j_b`` summed with ``fsum`` so the result is order independent."""
    grad, _ = _kernels.gather_numpy(nodal, h)
    A = grad.reshape(-1, grad.shape[-2], grad.shape[-1])
    coef = a[None, :, :, None, None] * b[None, None, None, :, :]
    terms = coef * A.transpose(0, 2, 1)[:, :, None, :, None] * A.transpose(0, 2, 1)[:, None, :, None, :]
    return math.fsum(terms.ravel()) * h ** 2


def swap_contradiction_demo(integrand: Lagrangian, family: CoefficientFamily, grid: Grid,
                            mode: str = "iso", probe: Optional[np.ndarray] = None,
                            seed: int = 0, fields: int = 3) -> VerificationReport:
    """Strict swap asymmetry of the integrand against exact swap invariance of the family.

    Modes ``iso``/``bild``/``dom`` pull fields back by ``(x1, x2) -> (x2, x1)``;
    ``urbild`` relabels the first two target components instead.  Mode
    ``dom`` replaces ``(e1|e2)`` by ``probe`` (default the bump probe matrix).
    """
    _check_family_mode(family, mode)
    if integrand.m != 2 or grid.dim != 2:
        raise StructuralError("swap demos need m = 2")
    N = integrand.n_target
    rep = VerificationReport("swap-contradiction", inputs={"mode": mode, "integrand": integrand.name,
                                                           "nodes_per_side": grid.nodes_per_side})
    if mode == "dom":
        P = np.asarray(PROBE_D if probe is None else probe, dtype=np.float64)
    else:
        P = np.zeros((N, 2))
        P[0, 0] = P[1, 1] = 1.0
    swapped = P[:, ::-1].copy()
    # u1 carries the larger energy: gradient (e1|e2) in the plain modes, the column-swapped probe in dom mode
    high, low = (swapped, P) if mode == "dom" else (P, swapped)
    e_high = _quadrature(integrand, _affine_field(grid, high))
    e_low = _quadrature(integrand, _affine_field(grid, low))
    gap = e_high - e_low
    rep.add("anisotropy gap: energy(u1) - energy(u2) > 0", gap > 0, gap, energy_u1=e_high, energy_u2=e_low)

    rng = np.random.default_rng(seed)
    h = grid.spacing
    worst = 0.0
    bitwise = True
    for k in range(fields):
        v = rng.standard_normal(grid.node_shape + (N,))
        if mode == "urbild":
            w = v[..., [1, 0] + list(range(2, N))]
        else:
            w = np.ascontiguousarray(v.transpose(1, 0, 2))
        for a, b in zip(family.a_n, family.b_n):
            ev = _riemannian_energy(a, b, v, h)
            ew = _riemannian_energy(a, b, w, h)
            worst = max(worst, abs(ev - ew))
            bitwise = bitwise and ev == ew
    rep.add("family energies invariant under the swap pullback (within 1e-12)", worst <= 1e-12,
            1e-12 - worst, max_difference=worst, bitwise_equal=bitwise, members=len(family))
    return rep


def default_family(mode: str, seed: int = 0) -> CoefficientFamily:
    """Small seeded coefficient families matching each swap mode."""
    rng = np.random.default_rng(seed)
    scalars = [0.5, 1.0, 2.0]
    if mode in ("iso", "dom"):
        a_n = [np.eye(2) for _ in scalars]
        b_n = [c * np.eye(3) for c in scalars]
    elif mode == "bild":
        a_n = [np.eye(2) for _ in scalars]
        b_n = []
        for c in scalars:
            R = rng.standard_normal((3, 3))
            b_n.append(c * np.eye(3) + 0.2 * (R + R.T))
    elif mode == "urbild":
        b_n = [np.eye(3) for _ in scalars]
        a_n = []
        for c in scalars:
            R = rng.standard_normal((2, 2))
            a_n.append(c * np.eye(2) + 0.2 * (R + R.T))
    else:
        raise StructuralError(f"unknown swap mode {mode!r}")
    bound = max(max(np.abs(a).max(), np.abs(b).max()) for a, b in zip(a_n, b_n))
    return CoefficientFamily(a_n, b_n, bound_M=bound, coercivity_c1=0.0, labels=[mode] * len(a_n))


def bump_dominance_lagrangian(weight: float = 0.1, bump: Optional[BumpH] = None,
                              base: Optional[DominanceFunction] = None) -> Lagrangian:
    """``g + weight * H``: a dominance function of ``|z|`` made swap-asymmetric by the bump."""
    bump = bump or build_bump_H()
    base = base or half_norm_dominance()
    lag = dominance_lagrangian(base, name=f"{base.name}+bump")

    def f(x, s, A):
        return base.g(s, A) + weight * bump(A)

    from dataclasses import replace
    return replace(lag, eval=f, derivative_A=None, derivative_s=None)


# =============================================================================
# product constraint systems
# =============================================================================

@dataclass
class ProductConstraintSystem:
    """Constraints ``sum_k coef_k * a[alpha_k beta_k] * b[i_k j_k] = target``.

    ``constraints`` holds ``(terms, target)`` with ``terms`` a list of
    ``(coef, a_name, b_name)``; names look like ``"a12"`` and ``"b23"``.
    """

    name: str
    unknowns: list
    constraints: list
    margin: float = 0.0
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        for terms, _ in self.constraints:
            for coef, an, bn in terms:
                if not (an.startswith("a") and bn.startswith("b")):
                    raise StructuralError("every monomial needs one a-factor and one b-factor")
                for nm in (an, bn):
                    if nm not in self.unknowns:
                        raise StructuralError(f"constraint uses undeclared unknown {nm!r}")

    @property
    def index(self) -> dict:
        return {nm: k for k, nm in enumerate(self.unknowns)}

    def unreferenced(self) -> list:
        used = {nm for terms, _ in self.constraints for _, an, bn in terms for nm in (an, bn)}
        return [nm for nm in self.unknowns if nm not in used]

    def residuals(self, x) -> np.ndarray:
        idx = self.index
        out = np.empty(len(self.constraints))
        for k, (terms, target) in enumerate(self.constraints):
            out[k] = sum(c * x[idx[an]] * x[idx[bn]] for c, an, bn in terms) - target
        return out

    def jacobian(self, x) -> np.ndarray:
        idx = self.index
        J = np.zeros((len(self.constraints), len(self.unknowns)))
        for k, (terms, _) in enumerate(self.constraints):
            for c, an, bn in terms:
                J[k, idx[an]] += c * x[idx[bn]]
                J[k, idx[bn]] += c * x[idx[an]]
        return J

    def linear_relaxation_residual(self) -> float:
        """Least-squares residual with each product ``a*b`` replaced by a free variable.

        Every product solution is a relaxation solution, so a positive value is
        a certified lower bound on the product residual.
        """
        pairs = sorted({(an, bn) for terms, _ in self.constraints for _, an, bn in terms})
        col = {p: k for k, p in enumerate(pairs)}
        M = np.zeros((len(self.constraints), len(pairs)))
        rhs = np.zeros(len(self.constraints))
        for k, (terms, target) in enumerate(self.constraints):
            rhs[k] = target
            for c, an, bn in terms:
                M[k, col[(an, bn)]] += c
        sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        return float(np.linalg.norm(M @ sol - rhs))


def _names(m: int = 2, N: int = 3) -> list:
    return [f"a{i}{j}" for i in range(1, m + 1) for j in range(1, m + 1)] + \
           [f"b{i}{j}" for i in range(1, N + 1) for j in range(1, N + 1)]


def system_from_probes(name: str, probes: Sequence, m: int = 2, N: int = 3, margin: float = 0.0,
                       notes: Optional[dict] = None) -> ProductConstraintSystem:
    """Constraints ``a^{ab} b_ij P^i_a P^j_b = target`` for each ``(P, target)`` probe."""
    constraints = []
    for P, target in probes:
        P = np.asarray(P, dtype=np.float64)
        terms = []
        for al in range(m):
            for be in range(m):
                for i in range(N):
                    for j in range(N):
                        c = P[i, al] * P[j, be]
                        if c != 0.0:
                            terms.append((float(c), f"a{al + 1}{be + 1}", f"b{i + 1}{j + 1}"))
        constraints.append((terms, float(target)))
    used = {nm for terms, _ in constraints for _, an, bn in terms for nm in (an, bn)}
    unknowns = [nm for nm in _names(m, N) if nm in used]
    return ProductConstraintSystem(name, unknowns, constraints, margin, notes or {})


def finsler_asym_system() -> ProductConstraintSystem:
    """The six limit products forced by the anisotropic Finsler density."""
    unknowns = ["a11", "a12", "a21", "a22", "b11", "b22"]
    constraints = [
        ([(1.0, "a11", "b11")], 1.0),
        ([(1.0, "a11", "b22")], 1.0),
        ([(1.0, "a22", "b11")], 1.0),
        ([(1.0, "a22", "b22")], 1.0),
        ([(1.0, "a12", "b11"), (1.0, "a21", "b11")], 0.0),
        ([(1.0, "a12", "b22"), (1.0, "a21", "b22")], 1.0),
    ]
    return ProductConstraintSystem("finsler-asym", unknowns, constraints, margin=0.1)


def control_system() -> ProductConstraintSystem:
    """Feasible control: ``a11 b11 = 1``, ``a11 b22 = 2``."""
    return ProductConstraintSystem("control", ["a11", "b11", "b22"],
                                   [([(1.0, "a11", "b11")], 1.0), ([(1.0, "a11", "b22")], 2.0)])


def _rows(*rows) -> np.ndarray:
    return np.array(rows, dtype=np.float64)


def cartan_system(phi: Optional[CartanIntegrand] = None, shift_M: float = 0.0) -> ProductConstraintSystem:
    """Zero-energy, parity and shifted-probe constraints from a ``u``-independent Cartan integrand."""
    phi = phi or cartan_norm()
    s0 = np.zeros(3)
    e1 = np.array([1.0, 0.0, 0.0])
    plus = float(phi(s0, e1))
    minus = float(phi(s0, -e1))
    Mp2, Mp1 = shift_M + 2.0, shift_M + 1.0
    probes = [
        (_rows([0, 0], [1, 0], [0, 0]), 0.0),
        (_rows([0, 0], [0, 0], [1, 0]), 0.0),
        (_rows([0, 0], [0, 1], [0, 0]), 0.0),
        (_rows([0, 0], [0, 0], [0, 1]), 0.0),
        (_rows([0, 0], [1, 0], [1, 0]), 0.0),
        (_rows([0, 0], [0, 1], [0, 1]), 0.0),
        (_rows([0, 0], [1, 0], [0, 1]), plus),
        (_rows([0, 0], [0, 1], [1, 0]), minus),
        (_rows([0, 0], [Mp2, 1], [0, 0]), 0.0),
        (_rows([0, 0], [0, 0], [Mp1, 1]), 0.0),
        (_rows([0, 0], [Mp2, 1], [Mp1, 1]), plus),
    ]
    parity = plus + minus
    return system_from_probes(f"cartan[{phi.name}]", probes, margin=0.0,
                              notes={"phi_e1": plus, "phi_minus_e1": minus, "parity_sum": parity,
                                     "shift_M": shift_M})


def _g_at(g: DominanceFunction, *cols) -> float:
    A = np.stack([np.asarray(c, dtype=np.float64) for c in cols], axis=-1)
    return float(g(np.zeros(3), A))


E1, E2, E3 = np.eye(3)
ZERO3 = np.zeros(3)


def dominance_system(g: Optional[DominanceFunction] = None) -> ProductConstraintSystem:
    """Seven probe constraints whose targets break the polarization identity of any quadratic form."""
    g = g or make_dominance_g()
    pairs = [
        ((E1, E2 + E3), +1), ((E1, E2), -1), ((E1, E3), -1), ((E1, ZERO3), +1),
        ((ZERO3, E2 + E3), -1), ((ZERO3, E2), +1), ((ZERO3, E3), +1),
    ]
    probes = [(np.stack(cols, axis=-1), _g_at(g, *cols)) for cols, _ in pairs]
    defect = math.fsum(sign * target for (_, sign), (_, target) in zip(pairs, probes))
    return system_from_probes(f"dominance[{g.name}]", probes, margin=0.0,
                              notes={"polarization_defect": defect, "weights": [s for _, s in pairs]})


BUILTIN_SYSTEMS = {
    "finsler-asym": finsler_asym_system,
    "cartan": cartan_system,
    "dominance": dominance_system,
    "control": control_system,
}


def solve_multistart(system: ProductConstraintSystem, starts: int = 64, seed: int = 0,
                     scale: float = 2.0) -> tuple:
    """Best least-squares residual norm over seeded starts; returns ``(residual, x)``."""
    rng = np.random.default_rng(seed)
    best, best_x = np.inf, None
    n = len(system.unknowns)
    for _ in range(starts):
        x0 = scale * rng.standard_normal(n)
        sol = least_squares(system.residuals, x0, jac=system.jacobian, method="trf",
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
        res = float(np.linalg.norm(system.residuals(sol.x)))
        if res < best:
            best, best_x = res, sol.x
    return best, best_x


def _chain_finsler(system: ProductConstraintSystem, rep: VerificationReport):
    t = [target for _, target in system.constraints]
    ratio = t[0] / t[1]
    rep.add("a11 b11 = a11 b22 = 1 forces b11 = b22", ratio == 1.0, 0.0 if ratio == 1.0 else -abs(ratio - 1),
            ratio_b11_over_b22=ratio)
    small, large = abs(t[4]), abs(t[5])
    fires = small < 0.25 and large > 0.75
    rep.add("limits force |(a12+a21) b11| < 1/4 and |(a12+a21) b22| > 3/4, hence 3|b11| < |b22|",
            fires, min(0.25 - small, large - 0.75), limit_b11=t[4], limit_b22=t[5])
    rep.add("3|b11| < |b22| contradicts b11 = b22", fires and ratio == 1.0, large - 3 * small)


def _chain_cartan(system: ProductConstraintSystem, rep: VerificationReport):
    plus, minus = system.notes["phi_e1"], system.notes["phi_minus_e1"]
    M = system.notes["shift_M"]
    # quadratic expansion of the shifted probe: plus = (M+2) plus + (M+1) minus
    defect = (M + 2) * plus + (M + 1) * minus - plus
    rep.add("shifted probe forces (M+1)(Phi(e1) + Phi(-e1)) = 0", True, 0.0, expanded_defect=defect)
    rep.add("Phi(e1) + Phi(-e1) > 0 contradicts it", plus + minus > 0, plus + minus,
            phi_e1=plus, phi_minus_e1=minus)


def _chain_dominance(system: ProductConstraintSystem, rep: VerificationReport):
    defect = system.notes["polarization_defect"]
    rep.add("probe targets violate the polarization identity of every quadratic form",
            abs(defect) > 1e-12, abs(defect), defect=defect)


def product_system_infeasibility(system: ProductConstraintSystem, starts: int = 64,
                                 seed: int = 0) -> VerificationReport:
    """Multistart least squares plus, for built-ins, the hand-derived implication chain."""
    unused = system.unreferenced()
    rep = VerificationReport(f"product-system[{system.name}]", inputs={"starts": starts, "seed": seed})
    if unused:
        warnings.warn(f"{system.name}: unknowns {unused} appear in no constraint", StructuralWarning)
        rep.inputs["warnings"] = [f"unreferenced unknowns: {unused}"]
    best, x = solve_multistart(system, starts, seed)
    relaxed = system.linear_relaxation_residual()
    rep.inputs.update({"best_residual": best, "linear_relaxation_residual": relaxed,
                       "best_point": dict(zip(system.unknowns, map(float, x)))})
    if system.name == "control":
        rep.add("feasible control solves to residual < 1e-8", best < 1e-8, 1e-8 - best, residual=best)
        return rep
    margin = system.margin
    if system.name.startswith("cartan"):
        margin = 0.25 * system.notes["parity_sum"] / math.sqrt(len(system.constraints))
    elif system.name.startswith("dominance"):
        margin = 0.5 * abs(system.notes["polarization_defect"]) / math.sqrt(len(system.constraints))
    rep.add("best multistart residual >= declared infeasibility margin", best >= margin, best - margin,
            residual=best, declared_margin=margin)
    if system.name == "finsler-asym":
        _chain_finsler(system, rep)
    elif system.name.startswith("cartan"):
        _chain_cartan(system, rep)
        rep.add("linear relaxation certifies a positive residual floor", relaxed > 0, relaxed)
    elif system.name.startswith("dominance"):
        _chain_dominance(system, rep)
        rep.add("linear relaxation certifies a positive residual floor", relaxed > 0, relaxed)
    return rep


# =============================================================================
# identity checks
# =============================================================================

DOMINANCE_PROBE_TAU = 2.0 * SQRT2 / 3.0


def dominance_identity_check(g: Optional[DominanceFunction] = None) -> VerificationReport:
    """The two evaluations of the dominance function that cannot agree for a quadratic form."""
    g = g or make_dominance_g()
    if g.eta is None:
        raise StructuralError("dominance_identity_check needs a cutoff-based dominance function")
    eta = g.eta
    eta_val = float(eta(DOMINANCE_PROBE_TAU))
    rep = VerificationReport("dominance-identities", inputs={"g": g.name, "eta_at_probe": eta_val})
    rep.add("cutoff is admissible", eta.is_admissible(), 0.0 if eta.is_admissible() else -1.0)
    lhs = _g_at(g, E1, E2 + E3)
    expect = 15.0 / 4.0 + 0.75 * eta_val
    rep.add("g(e1|e2+e3) = 15/4 + 3/4 eta(2 sqrt2/3)", abs(lhs - expect) <= 1e-12,
            1e-12 - abs(lhs - expect), value=lhs, expected=expect)
    parts = [_g_at(g, E1, E2), _g_at(g, E1, E3), -_g_at(g, E1, ZERO3), _g_at(g, ZERO3, E2 + E3),
             -_g_at(g, ZERO3, E2), -_g_at(g, ZERO3, E3)]
    combo = math.fsum(parts)
    rep.add("six-term combination = 19/4", abs(combo - 4.75) <= 1e-12, 1e-12 - abs(combo - 4.75),
            value=combo, terms=parts)
    implied = (combo - 15.0 / 4.0) / 0.75
    ok = abs(implied - 4.0 / 3.0) <= 1e-12 and implied > 1.0 and eta_val < 1.0
    rep.add("equating both forces eta(2 sqrt2/3) = 4/3 > 1 although eta < 1", ok, implied - eta_val,
            implied_eta=implied, configured_eta=eta_val)
    return rep


def cartan_parity_check(phi: CartanIntegrand) -> VerificationReport:
    rep = VerificationReport(f"cartan-parity[{phi.name}]")
    margin = phi.parity_margin()
    rep.add("Phi(e1) + Phi(-e1) > 0", margin > 0, margin, even=phi.even)
    return rep


def lsc_energy_check(domain_measure: float = 1.0, nodes: int = 16, zero_field: bool = False) -> VerificationReport:
    """Dirichlet and Cartan energies of ``u = (x1+x2)(1,1,1)`` on ``(0, measure) x (0, 1)``."""
    n = nodes
    x1 = np.linspace(0.0, domain_measure, n + 1)
    x2 = np.linspace(0.0, 1.0, n + 1)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    scal = np.zeros_like(X1) if zero_field else X1 + X2
    u = np.repeat(scal[..., None], 3, axis=-1)
    h1, h2 = domain_measure / n, 1.0 / n
    d1 = 0.5 * (np.diff(u, axis=0)[:, :-1] + np.diff(u, axis=0)[:, 1:]) / h1
    d2 = 0.5 * (np.diff(u, axis=1)[:-1, :] + np.diff(u, axis=1)[1:, :]) / h2
    cell_area = h1 * h2
    dirichlet = math.fsum((np.sum(d1 ** 2, axis=-1) + np.sum(d2 ** 2, axis=-1)).ravel()) * cell_area
    cart = math.fsum(np.linalg.norm(wedge(d1, d2), axis=-1).ravel()) * cell_area
    expected = 0.0 if zero_field else 6.0 * domain_measure
    rep = VerificationReport("lsc-energy", inputs={"measure": domain_measure, "zero_field": zero_field})
    rep.add("Dirichlet energy = 6 |Omega|", abs(dirichlet - expected) <= 1e-10,
            1e-10 - abs(dirichlet - expected), value=dirichlet, expected=expected)
    rep.add("Cartan energy with Phi = |z| vanishes (parallel columns)", cart == 0.0, 0.0 if cart == 0.0 else -abs(cart), value=cart)
    return rep


def closing_form() -> QuadraticForm:
    r = 1.0 / SQRT2
    a = np.array([[r, 0.5], [-0.5, r]])
    b = np.array([[r, 0.5, 0.0], [-0.5, r, 0.0], [0.0, 0.0, r]])
    return QuadraticForm(a, b)


def closing_example_identity(samples: int = 1000, seed: int = 0) -> VerificationReport:
    """The non-symmetric product form reproduces ``|A|^2/2 + (A1 ^ A2)_3 / 2``."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((samples, 3, 2))
    A = np.concatenate([A, np.zeros((1, 3, 2)), np.eye(3)[None, :, :2]])
    q = closing_form()
    lhs = q(A)
    rhs = 0.5 * np.sum(A * A, axis=(1, 2)) + 0.5 * wedge(A[:, :, 0], A[:, :, 1])[:, 2]
    worst = float(np.max(np.abs(lhs - rhs)))
    rep = VerificationReport("closing-identity", inputs={"samples": samples, "seed": seed})
    rep.add("product form equals |A|^2/2 + (0,0,1/2).(A1 ^ A2)", worst <= 1e-12, 1e-12 - worst,
            max_difference=worst, value_at_e1_e2=float(lhs[-1]))
    iso = QuadraticForm(0.5 * np.eye(2), np.eye(3), isotropic=True)
    worst_iso = float(np.max(np.abs(iso(A) - 0.5 * np.sum(A * A, axis=(1, 2)))))
    rep.add("a = id/2, b = id gives |A|^2/2", worst_iso <= 1e-12, 1e-12 - worst_iso, max_difference=worst_iso)
    return rep


def bump_inequality_check(bump: Optional[BumpH] = None) -> VerificationReport:
    bump = bump or build_bump_H()
    margin = bump.swap_margin()
    rep = VerificationReport("bump-inequality", inputs={"k": bump.k, "mollify_radius": bump.mollify_radius,
                                                        "phi_half_width": bump.phi_half_width,
                                                        "probe_values": bump.probe_values})
    rep.add("H(D~) - H(D) > 0", margin > 0, margin, H_D=float(bump(PROBE_D)), H_Dswap=float(bump(PROBE_D[:, ::-1])))
    return rep


# =============================================================================
# suite
# =============================================================================

SUITES = ("all", "density", "swap", "products", "identities", "cartan", "bump", "lsc")


def run_suite(suite: str = "all", seed: int = 0) -> list:
    """Run a named group of checks; returns the list of reports."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")
    want = (lambda name: suite in ("all", name))
    reports = []
    if want("density"):
        for L in (1, 10):
            reports.append(relative_density_check(inclusion_length=L))
    bump = None
    if want("swap") or want("bump"):
        bump = build_bump_H()
    if want("swap"):
        grid = Grid(2, 1.0, 8)
        swap = make_swap_anisotropic()
        for mode in ("iso", "bild", "urbild"):
            reports.append(swap_contradiction_demo(swap, default_family(mode, seed), grid, mode, seed=seed))
        reports.append(swap_contradiction_demo(bump_dominance_lagrangian(0.1, bump), default_family("dom", seed),
                                               grid, "dom", seed=seed))
    if want("products"):
        for sysf in (finsler_asym_system, control_system, lambda: cartan_system(cartan_norm()),
                     lambda: cartan_system(cartan_noneven()), dominance_system):
            reports.append(product_system_infeasibility(sysf(), seed=seed))
    if want("identities"):
        for eta in (smoothstep_quintic(), smoothstep_cubic()):
            reports.append(dominance_identity_check(make_dominance_g(eta)))
        reports.append(closing_example_identity(seed=seed))
    if want("cartan"):
        reports.append(cartan_parity_check(cartan_noneven()))
        reports.append(cartan_parity_check(cartan_norm()))
    if want("bump"):
        reports.append(bump_inequality_check(bump))
    if want("lsc"):
        reports.append(lsc_energy_check(1.0))
        reports.append(lsc_energy_check(2.0))
    return reports


__all__ = [
    "ProductConstraintSystem", "StructuralWarning", "BUILTIN_SYSTEMS", "SWAP_MODES",
    "almost_period_member", "relative_density_check", "swap_contradiction_demo", "default_family",
    "bump_dominance_lagrangian", "system_from_probes", "finsler_asym_system", "control_system",
    "cartan_system", "dominance_system", "solve_multistart", "product_system_infeasibility",
    "dominance_identity_check", "cartan_parity_check", "lsc_energy_check", "closing_form",
    "closing_example_identity", "bump_inequality_check", "run_suite", "constant_one",
]
