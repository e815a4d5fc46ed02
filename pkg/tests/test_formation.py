import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mixform.errors import ScenarioError
from mixform.formation import (
    FormationSpec,
    edge_state,
    gradient,
    incidence_matrix,
    potential,
    rigidity_matrix,
    rigidity_rank,
)

SQUARE = FormationSpec(4, ((1, 2), (2, 3), (3, 4), (4, 1), (1, 3)), (0.4, 0.4, 0.4, 0.4, 0.4 * math.sqrt(2)))
# corners ordered so that 1-3 is a diagonal
SQUARE_X = np.array([[0.0, 0.0], [0.4, 0.0], [0.4, 0.4], [0.0, 0.4]])

coords = st.floats(-5.0, 5.0, allow_nan=False)


@st.composite
def graphs(draw):
    n = draw(st.integers(2, 6))
    pairs = [(i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i != j]
    edges = draw(st.lists(st.sampled_from(pairs), min_size=1, max_size=10))
    d = draw(st.lists(st.floats(0.1, 3.0), min_size=len(edges), max_size=len(edges)))
    return FormationSpec(n, tuple(edges), tuple(d))


def test_square_incidence_matrix():
    expected = np.array(
        [
            [1, 0, 0, -1, 1],
            [-1, 1, 0, 0, 0],
            [0, -1, 1, 0, -1],
            [0, 0, -1, 1, 0],
        ],
        dtype=float,
    )
    np.testing.assert_array_equal(incidence_matrix(SQUARE), expected)


def test_single_edge_column():
    np.testing.assert_array_equal(incidence_matrix(FormationSpec(2, ((1, 2),), (1.0,))), [[1.0], [-1.0]])


@given(graphs())
def test_incidence_columns(spec):
    B = incidence_matrix(spec)
    np.testing.assert_array_equal(B.sum(axis=0), 0.0)
    assert np.all((B == 1).sum(axis=0) == 1)
    assert np.all((B == -1).sum(axis=0) == 1)


@pytest.mark.parametrize(
    "n,edges,d",
    [
        (2, ((1, 1),), (1.0,)),
        (2, ((1, 3),), (1.0,)),
        (2, ((1, 2),), (0.0,)),
        (2, ((1, 2),), (1.0, 2.0)),
    ],
)
def test_bad_specs(n, edges, d):
    with pytest.raises(ScenarioError):
        FormationSpec(n, edges, d)


def test_edge_state_at_desired_shape():
    es = edge_state(SQUARE, SQUARE_X)
    np.testing.assert_allclose(es.e, 0.0, atol=1e-15)
    assert potential(es.e) == pytest.approx(0.0, abs=1e-30)


def test_two_agent_example():
    spec = FormationSpec(2, ((1, 2),), (2.0,))
    x = [0.0, 0.0, 1.0, 0.0]
    es = edge_state(spec, x)
    np.testing.assert_array_equal(es.z, [[-1.0, 0.0]])
    np.testing.assert_array_equal(es.e, [-3.0])
    assert potential(es.e) == 4.5
    np.testing.assert_array_equal(gradient(spec, x), [6.0, 0.0, -6.0, 0.0])


@given(graphs(), st.data())
def test_error_definition(spec, data):
    x = data.draw(arrays(float, 2 * spec.n_agents, elements=coords))
    es = edge_state(spec, x)
    np.testing.assert_allclose(np.sum(es.z**2, axis=1) - es.e, np.square(spec.d_star), atol=1e-12)
    assert potential(es.e) == pytest.approx(0.5 * float(np.sum(es.e**2)))


def test_zero_error_zero_gradient():
    np.testing.assert_allclose(gradient(SQUARE, SQUARE_X), 0.0, atol=1e-15)


def test_gradient_finite_difference(rng):
    h = 1e-6
    worst = 0.0
    for _ in range(1000):
        x = rng.uniform(-1.0, 1.0, 8)
        fd = np.empty(8)
        for j in range(8):
            d = np.zeros(8)
            d[j] = h
            fd[j] = (potential(edge_state(SQUARE, x + d).e) - potential(edge_state(SQUARE, x - d).e)) / (2 * h)
        worst = max(worst, np.abs(fd - gradient(SQUARE, x)).max())
    assert worst <= 1e-6


def test_gradient_matches_block_form(rng):
    # stacked form (B kron I2) diag(z) e, times 2
    B = incidence_matrix(SQUARE)
    for _ in range(20):
        x = rng.uniform(-1.0, 1.0, 8)
        es = edge_state(SQUARE, x)
        Bbar = np.kron(B, np.eye(2))
        D = np.zeros((10, 5))
        for k in range(5):
            D[2 * k : 2 * k + 2, k] = es.z[k]
        np.testing.assert_allclose(gradient(SQUARE, x), 2 * Bbar @ D @ es.e, atol=1e-12)


@given(st.floats(-math.pi, math.pi), st.floats(-3, 3), st.floats(-3, 3))
def test_gradient_vanishes_on_rigid_motions(theta, tx, ty):
    R = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    x = SQUARE_X @ R.T + [tx, ty]
    np.testing.assert_allclose(gradient(SQUARE, x), 0.0, atol=1e-12)


@given(arrays(float, 8, elements=st.floats(-1, 1)), st.floats(-3, 3), st.floats(-3, 3))
def test_errors_translation_invariant(x, tx, ty):
    shifted = (x.reshape(4, 2) + [tx, ty]).reshape(-1)
    np.testing.assert_allclose(edge_state(SQUARE, shifted).e, edge_state(SQUARE, x).e, atol=1e-12)


def test_square_is_infinitesimally_rigid():
    assert rigidity_rank(SQUARE, SQUARE_X) == 5
    R = rigidity_matrix(SQUARE, SQUARE_X)
    # restricted to edge space the Gram matrix is positive definite
    assert np.linalg.eigvalsh(R @ R.T).min() > 1e-6


def test_collocated_rank_zero():
    assert rigidity_rank(SQUARE, np.zeros(8)) == 0


def test_triangle_rank():
    tri = FormationSpec(3, ((1, 2), (2, 3), (3, 1)), (1.0, 1.0, 1.0))
    assert rigidity_rank(tri, [0.0, 0.0, 1.0, 0.1, 0.3, 0.9]) == 3


def test_square_without_diagonal_is_flexible():
    ring = FormationSpec(4, SQUARE.edges[:4], SQUARE.d_star[:4])
    assert rigidity_rank(ring, SQUARE_X) == 4


def test_neighbours_and_incident_edges():
    assert SQUARE.incident_edges(0) == [0, 3, 4]
    assert SQUARE.neighbours(0) == {1, 2, 3}
    assert SQUARE.neighbours(1) == {0, 2}
