"""The fourteen acceptance criteria, each timed and reported on one line.

Run with ``pytest tests/test_acceptance.py -v``; the PASS/FAIL lines are
printed even when output capture is on.
"""
import itertools
import math
import time

import numpy as np
import pytest

from gammahom.cell import SolveConfig
from gammahom.homogenize import HomSchedule, estimate_f_hom, permutation_symmetry_check
from gammahom.models import (
    BUILTIN_MODELS,
    cartan_noneven,
    cartan_norm,
    checkerboard,
    derivative_check,
    get_model,
    layered_1d,
    make_dominance_g,
    riemannian_iso,
    smoothstep_cubic,
    smoothstep_quintic,
    squared_norm,
)
from gammahom.tiling import TilingParams, build_tiling, verify_subadditivity, verify_tiling
from gammahom.verifier import (
    almost_period_member,
    bump_inequality_check,
    cartan_parity_check,
    closing_example_identity,
    control_system,
    dominance_identity_check,
    finsler_asym_system,
    lsc_energy_check,
    product_system_infeasibility,
    relative_density_check,
)


@pytest.fixture
def record(capsys):
    def _record(number, title, passed, seconds, limit, detail=""):
        ok = bool(passed) and seconds < limit
        with capsys.disabled():
            print(f"\nACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'} {title}: {detail} "
                  f"[{seconds:.2f} s, limit {limit} s]")
        assert passed, detail
        assert seconds < limit, f"took {seconds:.2f} s, limit {limit} s"
    return _record


def _timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


def test_01_convex_sanity(record):
    rng = np.random.default_rng(2024)
    Ys = [rng.standard_normal((2, 2)) for _ in range(5)]
    sched = HomSchedule((1.0, 2.0), 4)

    def run():
        return [abs(estimate_f_hom(squared_norm(2, 2), Y, sched).f_hom_estimate - float(np.sum(Y * Y))) for Y in Ys]

    errors, secs = _timed(run)
    record(1, "convex sanity |A|^2", max(errors) < 1e-8, secs, 5, f"max error {max(errors):.2e}")


def test_02_layered_1d(record):
    oracle = 2.0 / (1.0 / 1.0 + 1.0 / 2.0)
    sched = HomSchedule((1.0, 2.0, 4.0), 512)
    res, secs = _timed(lambda: estimate_f_hom(layered_1d(), np.ones((1, 1)), sched))
    rel = abs(res.f_hom_estimate - oracle) / oracle
    record(2, "1D layered harmonic mean", rel < 0.02 and res.ok, secs, 60,
           f"estimate {res.f_hom_estimate:.10f}, relative error {rel:.2e}")


def test_03_checkerboard_bounds(record):
    sched = HomSchedule((1.0, 2.0), 64)
    res, secs = _timed(lambda: estimate_f_hom(checkerboard(), np.array([[1.0, 0.0]]), sched))
    lo, hi = 4.0 / 3.0 - 0.02, 1.5 + 0.02
    record(3, "2D checkerboard Voigt-Reuss bounds", lo <= res.f_hom_estimate <= hi, secs, 600,
           f"estimate {res.f_hom_estimate:.6f} in [{lo:.6f}, {hi:.6f}]")


def _enumerated_remainder(tiling):
    """Unit cells of (0,s)^m not inside any outer box, by exhaustive enumeration."""
    covered = set()
    for z in tiling.index_set:
        lo, hi = tiling.box_outer(z)
        covered.update(itertools.product(*[range(a, b) for a, b in zip(lo, hi)]))
    inside = [c for c in covered if all(0 <= v < tiling.s for v in c)]
    return tiling.s ** tiling.m - len(inside)


def test_04_tiling_exactness(record):
    instances = [(2, 13, 2), (1, 6, 1), (1, 11, 2), (3, 40, 2)]

    def run():
        out = []
        for t, s, m in instances:
            tiling = build_tiling(TilingParams(t, s, m))
            count = (s // (t + 4)) ** m
            remainder = s ** m - count * (t + 2) ** m
            out.append(len(tiling.index_set) == count
                       and _enumerated_remainder(tiling) == remainder
                       and verify_tiling(tiling).overall)
        return out

    flags, secs = _timed(run)
    record(4, "tiling counts and clauses", all(flags), secs, 5, f"instances ok {flags}")


def test_05_subadditivity(record):
    rep, secs = _timed(lambda: verify_subadditivity(layered_1d(), np.ones((1, 1)), 2, 13, SolveConfig(),
                                                    nodes_per_unit=64))
    inp = rep.inputs
    chain = inp["g_s"] <= inp["E_s"] <= inp["bound"]
    record(5, "subadditivity chain", rep.overall and chain, secs, 60,
           f"g_s {inp['g_s']:.6f} <= E_s {inp['E_s']:.6f} <= bound {inp['bound']:.6f}")


def test_06_dominance_identities(record):
    def run():
        return [dominance_identity_check(make_dominance_g(eta)) for eta in (smoothstep_quintic(), smoothstep_cubic())]

    reps, secs = _timed(run)
    six = [r.clause("six-term").values["value"] for r in reps]
    implied = [r.clause("equating").values["implied_eta"] for r in reps]
    ok = (all(r.overall for r in reps) and all(abs(v - 19 / 4) <= 1e-12 for v in six)
          and all(abs(v - 4 / 3) <= 1e-12 for v in implied) and abs(six[0] - six[1]) <= 1e-12)
    record(6, "dominance identities", ok, secs, 1, f"six-term {six}, implied eta {implied}")


def test_07_relative_density(record):
    def run():
        reps = [relative_density_check(inclusion_length=L) for L in (1, 10)]
        members = (almost_period_member((1, -1)), almost_period_member((1, 0)))
        return reps, members

    (reps, members), secs = _timed(run)
    ok = all(r.overall for r in reps) and members == (True, False)
    record(7, "relative density failure", ok, secs, 1, f"membership (1,-1), (1,0) = {members}")


def test_08_coefficient_infeasibility(record):
    def run():
        return product_system_infeasibility(finsler_asym_system(), starts=64), \
            product_system_infeasibility(control_system(), starts=64)

    (asym, control), secs = _timed(run)
    r_asym, r_ctrl = asym.inputs["best_residual"], control.inputs["best_residual"]
    ok = asym.overall and r_asym >= 0.1 and control.overall and r_ctrl < 1e-8
    record(8, "coefficient infeasibility", ok, secs, 10,
           f"finsler-asym residual {r_asym:.4f}, control residual {r_ctrl:.2e}")


def test_09_cartan_parity(record):
    phis = (cartan_noneven(), cartan_norm())
    reps, secs = _timed(lambda: [cartan_parity_check(p) for p in phis])
    margins = [r.clauses[0].margin for r in reps]
    ok = all(r.overall for r in reps) and {p.even for p in phis} == {True, False} and margins[1] == 2.0
    record(9, "Cartan parity", ok, secs, 1, f"margins {margins}")


def test_10_closing_identity(record):
    rep, secs = _timed(lambda: closing_example_identity(samples=1000, seed=0))
    worst = rep.clauses[0].values["max_difference"]
    record(10, "closing identity", rep.overall and worst <= 1e-12, secs, 1, f"max difference {worst:.2e}")


def test_11_bump_inequality(record):
    rep, secs = _timed(bump_inequality_check)
    margin = rep.clauses[0].margin
    record(11, "bump inequality", rep.overall and margin > 0, secs, 30, f"margin {margin:.6f}")


def test_12_gradient_hygiene(record):
    names = [n for n in sorted(BUILTIN_MODELS) if get_model(n).has_derivatives]
    errors, secs = _timed(lambda: {n: derivative_check(get_model(n), points=100, seed=0) for n in names})
    worst = max(errors.values())
    record(12, "gradient hygiene", worst < 1e-5 and len(names) >= 1, secs, 30,
           f"{len(names)} models, worst relative error {worst:.2e}")


def test_13_lsc_energy(record):
    reps, secs = _timed(lambda: [lsc_energy_check(measure) for measure in (1.0, 2.5)])
    values = [r.clauses[0].values["value"] for r in reps]
    ok = all(r.overall for r in reps) and all(abs(v - 6 * mu) <= 1e-10 for v, mu in zip(values, (1.0, 2.5)))
    record(13, "lsc energy constant", ok, secs, 1, f"energies {values}")


def test_14_permutation_symmetry(record):
    Y = np.array([[1.0, 0.0], [0.0, 0.5]])
    sched = HomSchedule((1.0, 2.0, 4.0), 16)
    rep, secs = _timed(lambda: permutation_symmetry_check(riemannian_iso(), Y, sched))
    vals = rep.clause("estimates").values
    record(14, "permutation symmetry", rep.overall, secs, 600,
           f"estimates {vals['estimate']:.6f} vs {vals['estimate_permuted']:.6f}, "
           f"difference {vals['difference']:.2e} <= allowed {vals['allowed']:.2e}")
