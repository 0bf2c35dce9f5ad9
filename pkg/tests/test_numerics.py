import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gammahom.errors import StructuralError
from gammahom.numerics import Grid, GridField, as_matrix, gradient_at_cells, integrate_cellwise, wedge, cell_averages

finite = st.floats(-10, 10, allow_nan=False)


def test_zero_field_has_zero_gradients():
    grid = Grid(2, 1.0, 4)
    grads = gradient_at_cells(GridField.zeros(grid, 3))
    assert grads.shape == (4, 4, 3, 2)
    assert np.all(grads == 0.0)


def test_hand_difference_quotient_1d():
    grid = Grid(1, 1.0, 2)
    u = GridField(grid, 1, np.array([[0.0], [0.5], [0.0]]))
    np.testing.assert_array_equal(gradient_at_cells(u)[:, 0, 0], [1.0, -1.0])


def test_corner_average_is_midpoint_value():
    grid = Grid(1, 1.0, 2)
    u = GridField(grid, 1, np.array([[0.0], [0.5], [0.0]]))
    np.testing.assert_array_equal(cell_averages(u)[:, 0], [0.25, 0.25])


@given(Y=arrays(np.float64, (3, 2), elements=finite), n=st.integers(1, 7), side=st.sampled_from([0.5, 1.0, 3.0]))
def test_affine_fields_reproduced(Y, n, side):
    grid = Grid(2, side, n)
    u = GridField.from_function(grid, lambda x: x @ Y.T, 3)
    grads = gradient_at_cells(u)
    np.testing.assert_allclose(grads, np.broadcast_to(Y, grads.shape), atol=1e-12 * (1 + np.abs(Y).max()) / side * n)


def test_component_mismatch_is_structural():
    with pytest.raises(StructuralError):
        gradient_at_cells(GridField.zeros(Grid(2, 1.0, 2), 2), components=3)


@pytest.mark.parametrize("side,dim,n,value,expected", [(2.0, 2, 5, 1.0, 4.0), (1.0, 1, 3, 2.5, 2.5)])
def test_integrate_constant(side, dim, n, value, expected):
    grid = Grid(dim, side, n)
    assert integrate_cellwise(np.full(grid.n_cells, value), grid) == pytest.approx(expected, rel=1e-15)


def test_integrate_values_1d():
    assert integrate_cellwise([1, 2, 3, 4], Grid(1, 1.0, 4)) == 2.5


def test_integrate_length_mismatch():
    with pytest.raises(StructuralError):
        integrate_cellwise([1, 2, 3], Grid(1, 1.0, 4))


def test_wedge_examples():
    e1, e2, e3 = np.eye(3)
    np.testing.assert_array_equal(wedge(e1, e2), e3)
    np.testing.assert_array_equal(wedge(e1, e1), 0.0)
    w = wedge(e1, e2 + e3)
    np.testing.assert_array_equal(w, [0.0, -1.0, 1.0])
    assert np.linalg.norm(w) == pytest.approx(np.sqrt(2))


def test_wedge_dimension_check():
    with pytest.raises(StructuralError):
        wedge([1.0, 0.0], [0.0, 1.0])


@given(a=arrays(np.float64, 3, elements=finite), b=arrays(np.float64, 3, elements=finite),
       c=arrays(np.float64, 3, elements=finite), k=finite)
def test_wedge_bilinear_antisymmetric_lagrange(a, b, c, k):
    np.testing.assert_allclose(wedge(a, b), -wedge(b, a), atol=1e-12)
    np.testing.assert_allclose(wedge(a + k * c, b), wedge(a, b) + k * wedge(c, b), atol=1e-9 * (1 + abs(k)) * 100)
    lhs = np.sum(wedge(a, b) ** 2)
    rhs = np.dot(a, a) * np.dot(b, b) - np.dot(a, b) ** 2
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, np.dot(a, a) * np.dot(b, b))


def test_grid_counts_and_spacing():
    g = Grid(2, 3.0, 6)
    assert g.spacing == 0.5
    assert g.n_nodes == 49
    assert g.boundary_mask().sum() == 49 - 25


def test_grid_with_resolution_requires_integer_nodes():
    assert Grid.with_resolution(2, 2, 8).nodes_per_side == 16
    with pytest.raises(StructuralError):
        Grid.with_resolution(1, 1.3, 3)


def test_as_matrix_rejects_nonfinite_and_shape():
    assert as_matrix(2.0).shape == (1, 1)
    with pytest.raises(StructuralError):
        as_matrix([[np.nan]])
    with pytest.raises(StructuralError):
        as_matrix(np.eye(2), rows=3)


@given(vals=arrays(np.float64, (9, 2), elements=st.floats(-1e300, 1e300, allow_nan=False)))
def test_gridfield_text_roundtrip_is_exact(vals):
    u = GridField(Grid(2, 1.0, 2), 2, vals)
    back = GridField.loads(u.dumps())
    assert back.grid == u.grid
    assert np.array_equal(back.values, u.values)


def test_gridfield_save_load(tmp_path):
    u = GridField.from_function(Grid(1, 2.0, 4), lambda x: np.sin(x), 1)
    u.save(tmp_path / "f.txt")
    assert np.array_equal(GridField.load(tmp_path / "f.txt").values, u.values)


def test_with_zero_boundary():
    u = GridField(Grid(2, 1.0, 3), 1, np.ones((16, 1))).with_zero_boundary()
    assert np.all(u.boundary_values() == 0.0)
    assert u.values.sum() == 4.0
