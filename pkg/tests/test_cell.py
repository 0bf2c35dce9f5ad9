import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gammahom.cell import (
    CellProblem,
    SolveConfig,
    cell_energy,
    energy_gradient,
    gradient_check,
    minimize,
    refinement_deltas,
)
from gammahom.errors import NumericalError, ParameterError, StructuralError
from gammahom.models import (
    Lagrangian,
    cartan_norm,
    checkerboard,
    dominance_lagrangian,
    get_model,
    layered_1d,
    make_counterexample_finsler,
    make_dominance_g,
    squared_norm,
)
from gammahom.numerics import Grid, GridField

small = st.floats(-3, 3, allow_nan=False)


def hat_1d():
    return GridField(Grid(1, 1.0, 2), 1, np.array([[0.0], [0.5], [0.0]]))


# -- cell energy ----------------------------------------------------------------

@given(Y=arrays(np.float64, (2, 2), elements=small), t=st.sampled_from([1.0, 2.0]))
def test_zero_field_energy_is_norm_squared(Y, t):
    prob = CellProblem.build(squared_norm(2, 2), Y, t, nodes_per_unit=4)
    assert cell_energy(prob, prob.zero_field()) == pytest.approx(np.sum(Y * Y), rel=1e-14, abs=1e-14)


def test_hat_energy_1d():
    prob = CellProblem(squared_norm(1, 1), np.zeros((1, 1)), 1.0, Grid(1, 1.0, 2))
    assert cell_energy(prob, hat_1d()) == 1.0


def test_layered_zero_field_is_arithmetic_mean():
    prob = CellProblem.build(layered_1d(), np.ones((1, 1)), 1.0, nodes_per_unit=8)
    assert cell_energy(prob, prob.zero_field()) == 1.5


def test_cell_energy_requires_zero_boundary():
    prob = CellProblem.build(squared_norm(1, 1), np.ones((1, 1)), 1.0, nodes_per_unit=4)
    u = GridField(prob.grid, 1, np.ones((5, 1)))
    with pytest.raises(StructuralError):
        cell_energy(prob, u)


def test_cell_energy_reports_nonfinite_cell():
    def f(x, s, A):
        out = np.sum(A * A, axis=(1, 2))
        out[2] = np.nan
        return out
    lag = Lagrangian("bad", 1, 1, f, depends_on_x=False, depends_on_s=False)
    prob = CellProblem.build(lag, np.ones((1, 1)), 1.0, nodes_per_unit=4)
    with pytest.raises(NumericalError) as info:
        cell_energy(prob, prob.zero_field())
    assert info.value.cell_index is not None


def test_problem_shape_validation():
    with pytest.raises(StructuralError):
        CellProblem.build(squared_norm(2, 1), np.ones((2, 2)), 1.0)


def test_solve_config_validation():
    for kwargs in ({"gradient_tolerance": 0.0}, {"shrink": 1.0}, {"max_iterations": -1}, {"init_scale": -1.0}):
        with pytest.raises((ParameterError, ValueError)):
            SolveConfig(**kwargs)


# -- minimisation -----------------------------------------------------------------

def test_convex_integrand_keeps_zero_field():
    Y = np.array([[1.0, 2.0], [3.0, -1.0]])
    sol = minimize(CellProblem.build(squared_norm(2, 2), Y, 1.0, 8))
    assert sol.converged
    assert sol.energy == pytest.approx(15.0, abs=1e-12)
    assert np.max(np.abs(sol.minimizer.values)) < 1e-10


def test_finsler_energy_equals_density_at_Y():
    Y = np.array([[0.3, -1.0], [2.0, 0.5], [0.0, 1.0]])
    lag = make_counterexample_finsler()
    sol = minimize(CellProblem.build(lag, Y, 1.0, 8), SolveConfig(restarts=1))
    assert sol.energy == pytest.approx(lag(0.0, 0.0, Y), abs=1e-8)


@pytest.mark.parametrize("t", [1.0, 2.0])
def test_layered_reaches_harmonic_mean(t):
    sol = minimize(CellProblem.build(layered_1d(), np.ones((1, 1)), t, 64))
    assert sol.converged
    assert sol.energy == pytest.approx(4.0 / 3.0, abs=1e-9)


def test_max_iterations_zero_returns_zero_field_energy():
    prob = CellProblem.build(get_model("riemannian-iso"), np.eye(2), 1.0, 8)
    sol = minimize(prob, SolveConfig(max_iterations=0))
    assert not sol.converged
    assert sol.iterations_used == 0
    assert sol.energy == cell_energy(prob, prob.zero_field())


def test_solution_energy_is_recomputable_and_no_worse_than_zero_field():
    prob = CellProblem.build(get_model("riemannian-iso"), np.eye(2), 1.0, 8)
    sol = minimize(prob, SolveConfig(restarts=2, seed=4))
    assert sol.energy == cell_energy(prob, sol.minimizer)
    assert sol.energy <= cell_energy(prob, prob.zero_field())
    assert np.all(sol.minimizer.boundary_values() == 0.0)
    assert len(sol.restart_energies) == 3


def test_determinism():
    prob = CellProblem.build(get_model("riemannian-iso"), np.eye(2), 1.0, 8)
    cfg = SolveConfig(restarts=2, seed=9, max_iterations=50)
    a, b = minimize(prob, cfg), minimize(prob, cfg)
    assert a.energy == b.energy
    assert np.array_equal(a.minimizer.values, b.minimizer.values)
    assert np.array_equal(a.restart_energies, b.restart_energies)


def test_energy_history_non_increasing_up_to_roundoff():
    prob = CellProblem.build(get_model("checkerboard"), np.array([[1.0, 0.0]]), 1.0, 16)
    sol = minimize(prob, SolveConfig(max_iterations=200))
    hist = np.array(sol.energy_history)
    slack = 64 * np.finfo(float).eps * np.maximum(np.abs(hist[:-1]), 1.0)
    assert np.all(np.diff(hist) <= slack)


def test_warm_start_is_used_and_never_worse():
    prob = CellProblem.build(layered_1d(), np.ones((1, 1)), 1.0, 32)
    good = minimize(prob)
    cfg = SolveConfig(max_iterations=0)
    warm = minimize(prob, cfg, warm_start=good.minimizer)
    assert warm.energy == pytest.approx(good.energy, abs=1e-14)
    assert warm.best_run == 1


def test_translation_consistency_for_x_independent_integrand():
    # an integer shift of the initial field leaves an s- and x-independent problem unchanged
    lag = make_counterexample_finsler()
    Y = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    prob = CellProblem.build(lag, Y, 1.0, 8)
    e0 = minimize(prob, SolveConfig(seed=0, restarts=1)).energy
    e1 = minimize(prob, SolveConfig(seed=5, restarts=1)).energy
    assert e0 == pytest.approx(e1, abs=1e-8)


# -- gradients ---------------------------------------------------------------------

def _random_field(grid, comps, seed, scale=0.3):
    vals = scale * np.random.default_rng(seed).standard_normal((grid.n_nodes, comps))
    return GridField(grid, comps, vals).with_zero_boundary()


def test_gradient_check_quadratic():
    prob = CellProblem.build(squared_norm(2, 2), np.eye(2), 1.0, 6)
    assert gradient_check(prob, _random_field(prob.grid, 2, 0), epsilon=1e-3) < 1e-8


def test_gradient_check_dominance_and_cartan():
    Y = np.array([[1.0, 0.2], [0.1, 1.3], [0.4, -0.5]])
    for lag in (dominance_lagrangian(make_dominance_g()), cartan_norm().associated_lagrangian()):
        prob = CellProblem.build(lag, Y, 1.0, 6)
        assert gradient_check(prob, _random_field(prob.grid, 3, 1, 0.05)) < 1e-5


def test_energy_gradient_zero_on_boundary():
    prob = CellProblem.build(get_model("riemannian-iso"), np.eye(2), 1.0, 6)
    g = energy_gradient(prob, _random_field(prob.grid, 2, 2))
    assert np.all(g[prob.grid.boundary_mask().ravel()] == 0.0)


def test_gradient_check_rejects_bad_epsilon():
    prob = CellProblem.build(squared_norm(1, 1), np.ones((1, 1)), 1.0, 4)
    with pytest.raises(ParameterError):
        gradient_check(prob, prob.zero_field(), epsilon=0.0)


@settings(max_examples=15)
@given(seed=st.integers(0, 10_000), t=st.sampled_from([1.0, 2.0]))
def test_discrete_jensen_for_convex_integrands(seed, t):
    # any zero-boundary field has energy >= f(Y) when f is convex in A only
    lag = make_counterexample_finsler()
    Y = np.random.default_rng(seed).standard_normal((3, 2))
    prob = CellProblem.build(lag, Y, t, 4)
    u = _random_field(prob.grid, 3, seed)
    assert cell_energy(prob, u) >= lag(0.0, 0.0, Y) - 1e-12


def test_record_export():
    prob = CellProblem.build(layered_1d(), np.ones((1, 1)), 1.0, 8)
    cfg = SolveConfig()
    rec = minimize(prob, cfg).to_record(prob, cfg)
    assert rec["grid"]["nodes_per_side"] == 8 and rec["config"]["max_iterations"] == cfg.max_iterations


def test_refinement_deltas_layered_exact():
    out = refinement_deltas(layered_1d(), np.ones((1, 1)), 1.0, nodes_per_unit=8, levels=3)
    assert out["nodes_per_unit"] == [8, 16, 32]
    assert all(abs(e - 4 / 3) < 1e-9 for e in out["energies"])
    assert len(out["deltas"]) == 2


def test_refinement_deltas_checkerboard_shrink():
    out = refinement_deltas(checkerboard(), np.array([[1.0, 0.0]]), 1.0, nodes_per_unit=8, levels=3)
    assert abs(out["deltas"][1]) < abs(out["deltas"][0])


def test_refinement_deltas_needs_two_levels():
    with pytest.raises(ParameterError):
        refinement_deltas(layered_1d(), np.ones((1, 1)), 1.0, levels=1)
