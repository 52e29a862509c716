import numpy as np
import pytest

from dualloop.errors import ValidationError
from dualloop.linops import (complex_from_json, complex_to_json, equal_up_to_phase, is_symplectic,
                             is_unitary, p_flip, random_unitary, symplectic_form,
                             symplectic_from_unitary)

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def brute_force_lift(U):
    """Evaluate the lift from its definition with explicitly built A and W."""
    n = U.shape[0]
    A = np.zeros((2 * n, 2 * n))
    for i in range(n):
        A[i, 2 * i] = 1          # x_i -> first half
        A[n + i, 2 * i + 1] = 1  # p_i -> second half
    # (a, a^dag) = W (x, p) with x = a + a^dag, p = -i a + i a^dag
    W = 0.5 * np.block([[np.eye(n), 1j * np.eye(n)], [np.eye(n), -1j * np.eye(n)]])
    big = np.block([[U, np.zeros((n, n))], [np.zeros((n, n)), U.conj()]])
    WA = W @ A
    return np.linalg.inv(WA) @ big @ WA


def test_is_unitary_examples():
    assert is_unitary(np.eye(3), 1e-10)
    assert not is_unitary(np.diag([1.0, 2.0]), 1e-10)
    assert is_unitary(H, 1e-10)


def test_is_unitary_rejects_non_square():
    with pytest.raises(ValidationError):
        is_unitary(np.ones((2, 3)))


def test_identity_lift():
    assert np.allclose(symplectic_from_unitary(np.eye(1)), np.eye(2), atol=1e-15)


@pytest.mark.parametrize("theta", [0.3, 1.2, np.pi, 4.0])
def test_phase_lift_is_rotation(theta):
    S = symplectic_from_unitary(np.array([[np.exp(1j * theta)]]))
    c, s = np.cos(theta), np.sin(theta)
    expected = np.array([[c, -s], [s, c]])
    assert np.allclose(S, expected, atol=1e-12)
    assert np.allclose(S, brute_force_lift(np.array([[np.exp(1j * theta)]])).real, atol=1e-12)


def test_beam_splitter_lift():
    S = symplectic_from_unitary(H)
    assert np.allclose(S, brute_force_lift(H).real, atol=1e-12)
    assert np.allclose(S[np.ix_([0, 2], [0, 2])], H, atol=1e-12)
    assert np.allclose(S[np.ix_([1, 3], [1, 3])], H, atol=1e-12)
    assert np.allclose(S[np.ix_([0, 2], [1, 3])], 0, atol=1e-12)


def test_lift_matches_brute_force_on_random(rng):
    for n in (2, 3, 5):
        U = random_unitary(n, rng)
        assert np.allclose(symplectic_from_unitary(U), brute_force_lift(U).real, atol=1e-12)


def test_lift_rejects_non_unitary():
    with pytest.raises(ValidationError):
        symplectic_from_unitary(np.diag([1.0, 2.0]))


def test_symplectic_form():
    assert np.array_equal(symplectic_form(1), [[0, 1], [-1, 0]])
    O2 = symplectic_form(2)
    assert np.array_equal(O2[:2, :2], [[0, 1], [-1, 0]]) and np.array_equal(O2[2:, 2:], O2[:2, :2])
    assert not O2[:2, 2:].any()
    for n in range(1, 6):
        assert np.array_equal(symplectic_form(n) @ symplectic_form(n), -np.eye(2 * n))


@pytest.mark.parametrize("n", range(2, 7))
def test_lift_is_orthogonal_symplectic_and_functorial(n, rng):
    for _ in range(20):
        U1, U2 = random_unitary(n, rng), random_unitary(n, rng)
        S1, S2 = symplectic_from_unitary(U1), symplectic_from_unitary(U2)
        assert is_symplectic(S1, 1e-10)
        assert np.allclose(S1.T @ S1, np.eye(2 * n), atol=1e-10)
        assert np.max(np.abs(symplectic_from_unitary(U1 @ U2) - S1 @ S2)) < 1e-9


def test_conjugate_lift_via_p_flip(rng):
    U = random_unitary(4, rng)
    F = p_flip(4)
    assert np.allclose(symplectic_from_unitary(U.conj()), F @ symplectic_from_unitary(U) @ F, atol=1e-12)


def test_random_unitary_is_unitary_and_seeded():
    U = random_unitary(6, 3)
    assert is_unitary(U)
    assert np.array_equal(U, random_unitary(6, 3))


def test_equal_up_to_phase():
    U = random_unitary(3, 1)
    dev, phase = equal_up_to_phase(np.exp(0.7j) * U, U)
    assert dev < 1e-12
    assert np.isclose(np.exp(1j * phase), np.exp(0.7j))


def test_json_round_trip():
    U = random_unitary(3, 2)
    data = complex_to_json(U)
    assert data[0][0] == [U[0, 0].real, U[0, 0].imag]
    assert np.array_equal(complex_from_json(data), U)
    assert np.array_equal(complex_from_json({"unitary": data}), U)


@pytest.mark.parametrize("bad", [[[1, 2]], [[[1]]], "x", [[[1, 0], [0]]]])
def test_json_rejects_malformed(bad):
    with pytest.raises(ValidationError):
        complex_from_json(bad)
