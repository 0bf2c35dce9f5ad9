"""Block partition of ``(0, s)^m`` into copies of a ``t``-cell, collars and a remainder.

All set computations use Python integers.  Each index ``z`` in
``{0, ..., K-1}^m`` with ``K = s // (t+4)`` owns an inner box
``B_z = sigma_z + [0, t)^m`` and an outer box ``tau_z + [0, t+2)^m``; the
collar is their difference and the remainder ``Q`` is everything left over.
"""

from __future__ import annotations

import io
import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cell import CellProblem, SolveConfig, cell_energy, minimize
from .errors import ParameterError, StructuralError
from .models.base import Lagrangian
from .numerics import Grid, GridField, as_matrix
from .reports import VerificationReport


@dataclass(frozen=True)
class TilingParams:
    t: int
    s: int
    m: int
    Y: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("t", "s", "m"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, np.integer)):
                raise ParameterError(f"{name} must be an integer, got {val!r}")
        if self.t <= 0 or self.m <= 0:
            raise ParameterError("t and m must be positive")
        if self.s <= self.t + 4:
            raise ParameterError(f"need s > t + 4, got t={self.t}, s={self.s}")
        Y = np.zeros((1, self.m)) if self.Y is None else as_matrix(self.Y)
        if Y.shape[1] != self.m:
            raise StructuralError(f"Y has {Y.shape[1]} columns, expected m = {self.m}")
        object.__setattr__(self, "Y", Y)

    @property
    def blocks_per_axis(self) -> int:
        return self.s // (self.t + 4)


@dataclass
class Tiling:
    params: TilingParams
    index_set: list
    sigma: dict
    tau: dict
    lam: dict

    @property
    def t(self) -> int:
        return self.params.t

    @property
    def s(self) -> int:
        return self.params.s

    @property
    def m(self) -> int:
        return self.params.m

    def box_B(self, z) -> tuple:
        lo = self.sigma[z]
        return lo, tuple(v + self.t for v in lo)

    def box_outer(self, z) -> tuple:
        lo = self.tau[z]
        return lo, tuple(v + self.t + 2 for v in lo)

    def collar(self, z) -> tuple:
        """``(outer box, inner box)``; the collar is the outer box minus the inner one."""
        return self.box_outer(z), self.box_B(z)

    def index_count_formula(self) -> int:
        return self.params.blocks_per_axis ** self.m

    def remainder_measure_formula(self) -> int:
        return self.s ** self.m - (self.t + 2) ** self.m * self.params.blocks_per_axis ** self.m

    def offset(self, z) -> np.ndarray:
        """Boundary value ``lambda_z - Y sigma_z`` of the patched field on ``B_z``."""
        return self.lam[z] - self.params.Y @ np.array(self.sigma[z], dtype=np.float64)

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write("# gammahom tiling v1\n")
        buf.write(f"t,{self.t}\ns,{self.s}\nm,{self.m}\n")
        buf.write(f"index_count,{len(self.index_set)}\n")
        buf.write(f"index_count_formula,{self.index_count_formula()}\n")
        buf.write(f"remainder_measure_formula,{self.remainder_measure_formula()}\n")
        buf.write("z;sigma;tau;lambda\n")
        for z in self.index_set:
            parts = [" ".join(str(v) for v in z), " ".join(str(v) for v in self.sigma[z]),
                     " ".join(str(v) for v in self.tau[z]), " ".join(str(int(v)) for v in self.lam[z])]
            buf.write(";".join(parts) + "\n")
        return buf.getvalue()


def build_tiling(params: TilingParams) -> Tiling:
    """Deterministic tiling: ``sigma_z = (t+4) z + 2``, ``lambda_z = ceil(Y sigma_z)``."""
    K = params.blocks_per_axis
    step = params.t + 4
    index_set = list(itertools.product(range(K), repeat=params.m))
    sigma, tau, lam = {}, {}, {}
    for z in index_set:
        sg = tuple(step * zi + 2 for zi in z)
        sigma[z] = sg
        tau[z] = tuple(v - 1 for v in sg)
        lam[z] = np.ceil(params.Y @ np.array(sg, dtype=np.float64))
    return Tiling(params, index_set, sigma, tau, lam)


def _boxes_overlap(a, b) -> bool:
    (alo, ahi), (blo, bhi) = a, b
    return all(x0 < y1 and y0 < x1 for x0, x1, y0, y1 in zip(alo, ahi, blo, bhi))


def _sup_dist(a, b) -> int:
    return max(abs(x - y) for x, y in zip(a, b))


def verify_tiling(tiling: Tiling) -> VerificationReport:
    """Check every structural claim exactly; violations become failing clauses."""
    t, s, m = tiling.t, tiling.s, tiling.m
    K = tiling.params.blocks_per_axis
    rep = VerificationReport("tiling", inputs={"t": t, "s": s, "m": m})
    zs = tiling.index_set

    expected = set(itertools.product(range(K), repeat=m))
    count_ok = len(zs) == K ** m and set(zs) == expected
    rep.add("index set is {0..K-1}^m with |I_s| = floor(s/(t+4))^m", count_ok,
            float(len(zs) - K ** m), count=len(zs), formula=K ** m)

    offsets = [v - (t + 4) * zi for z in zs for v, zi in zip(tiling.sigma[z], z)]
    sig_margin = min((min(d - 1, 2 - d) for d in offsets), default=1)
    rep.add("sigma_z lies in (t+4)z + (1,2]^m", all(1 < d <= 2 for d in offsets), float(sig_margin))

    tau_ok = all(tiling.tau[z] == tuple(v - 1 for v in tiling.sigma[z]) for z in zs)
    rep.add("tau_z = sigma_z - 1", tau_ok, 0.0 if tau_ok else -1.0)

    lam_gaps = [tiling.offset(z) for z in zs]
    lam_ok = all(np.all(g >= 0) and np.all(g < 1) for g in lam_gaps) and all(
        np.array_equal(tiling.lam[z], np.round(tiling.lam[z])) for z in zs)
    lam_margin = min((float(min(np.min(g), np.min(1 - g))) for g in lam_gaps), default=0.0)
    rep.add("lambda_z integer with lambda_z - Y sigma_z in [0,1)^N", lam_ok, lam_margin)

    outer = {z: tiling.box_outer(z) for z in zs}
    inner = {z: tiling.box_B(z) for z in zs}
    contain = min((min(min(lo[i], s - hi[i]) for i in range(m)) for lo, hi in outer.values()), default=s)
    rep.add("outer boxes tau_z + [0,t+2)^m lie in (0,s)^m", contain >= 0 and all(
        lo[i] > 0 and hi[i] <= s for lo, hi in outer.values() for i in range(m)), float(contain))
    contain_b = min((min(min(lo[i], s - hi[i]) for i in range(m)) for lo, hi in inner.values()), default=s)
    rep.add("inner boxes B_z lie in (0,s)^m", all(
        lo[i] > 0 and hi[i] <= s for lo, hi in inner.values() for i in range(m)), float(contain_b))

    overlaps = [(a, b) for a, b in itertools.combinations(zs, 2) if _boxes_overlap(outer[a], outer[b])]
    rep.add("outer boxes pairwise disjoint", not overlaps, -float(len(overlaps)), overlapping=len(overlaps))

    pairs = list(itertools.permutations(zs, 2))
    for label, first, second, bound in (
        ("|sigma_z - sigma_z'| >= t+3", tiling.sigma, tiling.sigma, t + 3),
        ("|tau_z - tau_z'| >= t+3", tiling.tau, tiling.tau, t + 3),
        ("|sigma_z - tau_z'| >= t+2", tiling.sigma, tiling.tau, t + 2),
    ):
        worst = min((_sup_dist(first[a], second[b]) for a, b in pairs), default=bound)
        rep.add(f"separation (sup norm) {label}", worst >= bound, float(worst - bound))

    # exhaustive enumeration of unit pixels [k, k+1)^m in [0, s)^m
    cover = np.zeros((s,) * m, dtype=np.int64)
    inner_cover = np.zeros((s,) * m, dtype=np.int64)
    for z in zs:
        lo, hi = outer[z]
        if all(0 <= a and b <= s for a, b in zip(lo, hi)):
            cover[tuple(slice(a, b) for a, b in zip(lo, hi))] += 1
        ilo, ihi = inner[z]
        if all(0 <= a and b <= s for a, b in zip(ilo, ihi)):
            inner_cover[tuple(slice(a, b) for a, b in zip(ilo, ihi))] += 1
    multiplicity = int(cover.max()) if cover.size else 0
    rep.add("pixel enumeration: no pixel in two outer boxes", multiplicity <= 1, float(1 - multiplicity))
    uncovered = int(np.count_nonzero(cover == 0))
    formula = tiling.remainder_measure_formula()
    rep.add("pixel enumeration: |Q| = s^m - (t+2)^m floor(s/(t+4))^m", uncovered == formula,
            -float(abs(uncovered - formula)), enumerated=uncovered, formula=formula)
    collar_pixels = int(np.count_nonzero((cover == 1) & (inner_cover == 0)))
    collar_formula = len(zs) * ((t + 2) ** m - t ** m)
    rep.add("pixel enumeration: collar measure = |I_s| ((t+2)^m - t^m)", collar_pixels == collar_formula,
            -float(abs(collar_pixels - collar_formula)), enumerated=collar_pixels, formula=collar_formula)
    return rep


def corrupt_sigma(tiling: Tiling, z, shift) -> Tiling:
    """Copy of ``tiling`` with ``sigma_z`` and ``tau_z`` moved by ``shift`` (test helper)."""
    sigma = dict(tiling.sigma)
    tau = dict(tiling.tau)
    sigma[z] = tuple(a + b for a, b in zip(sigma[z], shift))
    tau[z] = tuple(a + b for a, b in zip(tau[z], shift))
    return Tiling(tiling.params, list(tiling.index_set), sigma, tau, dict(tiling.lam))


# =============================================================================
# patched comparison field
# =============================================================================

def _nodes_per_unit(grid: Grid) -> int:
    ratio = grid.nodes_per_side / grid.side_length
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise StructuralError("grid spacing must divide 1 so that box faces fall on nodes")
    return int(round(ratio))


def patch_field(u_t: GridField, tiling: Tiling, Y, grid_s: Grid) -> GridField:
    """Assemble the comparison field on ``(0, s)^m`` from a ``t``-cell field.

    On each ``B_z`` the value is ``u_t(x - sigma_z) - Y sigma_z + lambda_z``;
    across the collar the constant ``lambda_z - Y sigma_z`` is blended to zero
    by a product of per-axis linear ramps; the remainder is zero.
    """
    t, s, m = tiling.t, tiling.s, tiling.m
    Y = as_matrix(Y, None, m)
    N = u_t.components
    if Y.shape[0] != N:
        raise StructuralError("Y rows must match the field components")
    if u_t.grid.dim != m or grid_s.dim != m:
        raise StructuralError("grid dimensions must equal m")
    if u_t.grid.side_length != t or grid_s.side_length != s:
        raise StructuralError("grids must have side lengths t and s")
    k = _nodes_per_unit(grid_s)
    if _nodes_per_unit(u_t.grid) != k:
        raise StructuralError("t-grid and s-grid spacings differ")
    if np.any(u_t.boundary_values() != 0.0):
        raise StructuralError("u_t must vanish on the cell boundary")

    h = grid_s.spacing
    out = np.zeros(grid_s.node_shape + (N,))
    ut = u_t.nodal()
    for z in tiling.index_set:
        sg = np.array(tiling.sigma[z], dtype=np.float64)
        minus_ysigma = -(Y @ sg)
        offset = minus_ysigma + tiling.lam[z]
        lo = [k * v for v in tiling.tau[z]]
        width = k * (t + 2)
        region = tuple(slice(a, a + width + 1) for a in lo)
        ramp = np.ones((width + 1,) * m)
        steps = np.arange(width + 1)
        per_axis = np.clip(np.minimum(steps, width - steps) * h, 0.0, 1.0)
        for axis in range(m):
            shape = [1] * m
            shape[axis] = width + 1
            ramp = ramp * per_axis.reshape(shape)
        out[region] = ramp[..., None] * offset
        inner = tuple(slice(k * v, k * (v + t) + 1) for v in tiling.sigma[z])
        out[inner] = ut + minus_ysigma + tiling.lam[z]
    field_s = GridField(grid_s, N, out)
    if np.any(field_s.boundary_values() != 0.0):
        raise StructuralError("patched field has non-zero boundary values")
    return field_s


def region_masks(tiling: Tiling, grid_s: Grid) -> dict:
    """Boolean cell masks (over ``grid_s.cell_shape``) for inner boxes, collars and remainder."""
    k = _nodes_per_unit(grid_s)
    inner = np.zeros(grid_s.cell_shape, dtype=bool)
    outer = np.zeros(grid_s.cell_shape, dtype=bool)
    for z in tiling.index_set:
        lo, hi = tiling.box_outer(z)
        outer[tuple(slice(k * a, k * b) for a, b in zip(lo, hi))] = True
        lo, hi = tiling.box_B(z)
        inner[tuple(slice(k * a, k * b) for a, b in zip(lo, hi))] = True
    return {"inner": inner, "collar": outer & ~inner, "remainder": ~outer}


def subadditivity_bound(t: int, s: int, m: int, c2: float, p: float, Y, g_t: float,
                        collar_energy: float) -> float:
    """Right-hand side of the ``g_s`` estimate with a directly computed collar term."""
    ynorm = float(np.linalg.norm(as_matrix(Y)))
    remainder = (1.0 - ((t + 2) / (t + 4) - (t + 2) / s) ** m) * c2 * (1.0 + ynorm ** p)
    return remainder + collar_energy + (t / (t + 4)) ** m * (g_t + 1.0 / t)


def verify_subadditivity(lagrangian: Lagrangian, Y, t: int, s: int,
                         solve_config: SolveConfig = SolveConfig(), nodes_per_unit: int = 32,
                         u_t: Optional[GridField] = None) -> VerificationReport:
    """Check ``g_s <= E_s <= bound`` with every term computed on the grid.

    ``E_s`` is the energy of the field patched from the ``t``-cell minimiser
    and ``g_s`` is solved with that field as one of its starts, so the first
    inequality reflects solver monotonicity.
    """
    params = TilingParams(int(t), int(s), lagrangian.m, Y)
    Y = as_matrix(Y, lagrangian.n_target, lagrangian.m)
    tiling = build_tiling(params)
    rep = VerificationReport("subadditivity", inputs={"model": lagrangian.name, "t": t, "s": s,
                                                      "nodes_per_unit": nodes_per_unit, "Y": Y.tolist()})
    prob_t = CellProblem.build(lagrangian, Y, t, nodes_per_unit)
    if u_t is None:
        sol_t = minimize(prob_t, solve_config)
        u_t = sol_t.minimizer
        rep.add("t-cell solve converged", sol_t.converged,
                solve_config.gradient_tolerance - sol_t.residual, residual=sol_t.residual)
    g_t = cell_energy(prob_t, u_t)

    prob_s = CellProblem.build(lagrangian, Y, s, nodes_per_unit)
    u_s = patch_field(u_t, tiling, Y, prob_s.grid)
    E_s = cell_energy(prob_s, u_s)
    sol_s = minimize(prob_s, solve_config, warm_start=u_s)
    g_s = sol_s.energy
    rep.add("s-cell solve converged", sol_s.converged,
            solve_config.gradient_tolerance - sol_s.residual, residual=sol_s.residual)

    # collar energy and gradient size measured on the collar cells
    from .cell import _Evaluator
    ev = _Evaluator(prob_s)
    vals = ev.cell_values(u_s.nodal()).reshape(prob_s.grid.cell_shape)
    masks = region_masks(tiling, prob_s.grid)
    collar_energy = float(np.sum(vals[masks["collar"]])) / vals.size
    _, A = ev._cells(u_s.nodal())
    A = A.reshape(prob_s.grid.cell_shape + A.shape[1:])
    collar_grad = float(np.max(np.sqrt(np.sum(A[masks["collar"]] ** 2, axis=(-2, -1))), initial=0.0))
    bound = subadditivity_bound(t, s, lagrangian.m, lagrangian.c2, lagrangian.p, Y, g_t, collar_energy)

    rep.add("g_s <= E_s (patched field is admissible)", g_s <= E_s, E_s - g_s, g_s=g_s, E_s=E_s)
    rep.add("E_s <= bound with measured collar energy", E_s <= bound, bound - E_s, E_s=E_s, bound=bound)
    rep.inputs.update({
        "g_t": g_t, "g_s": g_s, "E_s": E_s, "bound": bound, "collar_energy": collar_energy,
        "collar_gradient_sup": collar_grad, "index_count": len(tiling.index_set),
    })
    return rep
