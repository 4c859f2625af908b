import numpy as np
import pytest

from qemtp.embed import extend_system, normalize, qubits_needed, recover_solution
from qemtp.emtp import classical_solve
from qemtp.errors import DegenerateStateError, DimensionError, InvalidParameterError

from conftest import random_spd


def test_pad_three_to_four(rng):
    g = random_spd(3, rng)
    ext = extend_system(g, [1.0, 2.0, 3.0])
    assert ext.g_tilde.shape == (4, 4) and ext.n_qubits == 2
    assert ext.g_tilde[3, 3] == 1.0
    assert np.all(ext.g_tilde[3, :3] == 0.0) and np.all(ext.g_tilde[:3, 3] == 0.0)
    assert ext.i_hat[3] == 0.0


def test_power_of_two_unchanged(rng):
    g = random_spd(4, rng)
    ext = extend_system(g, np.ones(4))
    assert ext.n_qubits == 2
    np.testing.assert_array_equal(ext.g_tilde, g)


def test_pad_five_to_eight(rng):
    ext = extend_system(random_spd(5, rng), np.ones(5))
    assert ext.g_tilde.shape == (8, 8)
    np.testing.assert_array_equal(ext.g_tilde[5:, 5:], np.eye(3))
    assert np.all(ext.g_tilde[5:, :5] == 0.0)
    assert np.all(ext.i_hat[5:] == 0.0)


def test_single_node_gets_one_qubit():
    assert qubits_needed(1) == 1
    ext = extend_system([[2.0]], [1.0])
    np.testing.assert_array_equal(ext.g_tilde, [[2.0, 0.0], [0.0, 1.0]])


def test_roundtrip_and_symmetry(rng):
    g = random_spd(6, rng)
    i = rng.standard_normal(6)
    ext = extend_system(g, i)
    np.testing.assert_array_equal(ext.g_tilde[:6, :6], g)
    np.testing.assert_array_equal(ext.truncate(ext.i_hat), i)
    np.testing.assert_array_equal(ext.g_tilde, ext.g_tilde.T)
    assert abs(np.linalg.norm(ext.i_unit) - 1.0) <= 1e-15


def test_extend_shape_errors():
    with pytest.raises(DimensionError):
        extend_system(np.ones((2, 3)), [1.0, 2.0])
    with pytest.raises(DimensionError):
        extend_system(np.eye(2), [1.0, 2.0, 3.0])
    with pytest.raises(InvalidParameterError):
        qubits_needed(0)


def test_normalize_examples(rng):
    unit, norm = normalize([3.0, 4.0, 0.0, 0.0])
    np.testing.assert_allclose(unit, [0.6, 0.8, 0.0, 0.0])
    assert norm == 5.0
    e = np.array([0.0, 1.0])
    unit, norm = normalize(e)
    np.testing.assert_array_equal(unit, e)
    assert norm == 1.0
    unit, _ = normalize(rng.standard_normal(8))
    assert abs(np.linalg.norm(unit) - 1.0) <= 1e-15
    with pytest.raises(InvalidParameterError):
        normalize(np.zeros(4))


def test_recover_identity():
    v = recover_solution([1.0, 0.0, 0.0, 0.0], np.eye(4), [7.0, 0.0, 0.0, 0.0], original_dim=3)
    np.testing.assert_array_equal(v, [7.0, 0.0, 0.0])


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_recover_exact_direction(rng, sign):
    g = random_spd(8, rng, 30.0)
    i = rng.standard_normal(8)
    v_star = classical_solve(g, i)
    v = recover_solution(sign * v_star / np.linalg.norm(v_star), g, i)
    np.testing.assert_allclose(v, v_star, atol=1e-12 * np.linalg.norm(v_star))


def test_recover_orthogonal_direction_gives_zero(rng):
    g = random_spd(4, rng)
    i = rng.standard_normal(4)
    # Gram-Schmidt a direction whose image is orthogonal to i
    w = rng.standard_normal(4)
    gi = g @ i  # <G v, i> = <v, G i>
    w -= (w @ gi) / (gi @ gi) * gi
    v = recover_solution(w / np.linalg.norm(w), g, i)
    assert np.linalg.norm(i - g @ v) == pytest.approx(np.linalg.norm(i), rel=1e-12)


def test_recover_degenerate():
    with pytest.raises(DegenerateStateError):
        recover_solution([0.0, 1.0], [[1.0, 0.0], [0.0, 0.0]], [1.0, 0.0])
