import numpy as np
import pytest

from dualloop.decomp import (DecompositionPlan, TParams, decompose, reconstruct, reduce_step,
                             t_matrix, wrap_angle)
from dualloop.errors import ValidationError
from dualloop.linops import random_unitary


def t_elementwise(n, l, m, omega, phi):
    """Independent entry-by-entry construction of T_{l,m}."""
    T = [[complex(i == j) for j in range(n)] for i in range(n)]
    l, m = l - 1, m - 1
    e = complex(np.cos(phi), np.sin(phi))
    T[l][l] = e * np.sin(omega)
    T[l][m] = -e * np.cos(omega)
    T[m][l] = np.cos(omega)
    T[m][m] = np.sin(omega)
    return np.array(T)


def test_t_matrix_identity_and_swap():
    assert np.allclose(t_matrix(2, TParams(2, np.pi / 2, 0.0)), np.eye(2), atol=1e-15)
    assert np.allclose(t_matrix(2, TParams(2, 0.0, 0.0)), [[0, -1], [1, 0]], atol=1e-15)


def test_t_matrix_balanced_example():
    T = t_matrix(2, TParams(2, np.pi / 4, np.pi / 2))
    s = 1 / np.sqrt(2)
    assert np.allclose(T, [[1j * s, -1j * s], [s, s]], atol=1e-15)
    assert np.allclose(T, t_elementwise(2, 1, 2, np.pi / 4, np.pi / 2), atol=1e-15)


def test_t_matrix_embedding(rng):
    w, p = rng.uniform(0, 2 * np.pi, 2)
    assert np.allclose(t_matrix(5, TParams(4, w, p)), t_elementwise(5, 1, 4, w, p))
    with pytest.raises(ValidationError):
        t_matrix(3, TParams(4, w, p))


def test_tparams_validation():
    with pytest.raises(ValidationError):
        TParams(1, 0.0, 0.0)
    with pytest.raises(ValidationError):
        TParams(2, 0.0, 0.0, layer=0)


def test_reduce_step_identity():
    params, V, alpha = reduce_step(np.eye(3))
    assert all(p.is_identity for p in params)
    assert alpha == 0.0
    assert np.allclose(V, np.eye(2))


def test_reduce_step_diagonal_phase():
    beta = 1.1
    params, V, alpha = reduce_step(np.diag([1, 1, np.exp(1j * beta)]))
    assert all(p.is_identity for p in params)
    assert np.isclose(alpha, beta)


def test_reduce_step_product(rng):
    for _ in range(20):
        U = random_unitary(3, rng)
        params, V, alpha = reduce_step(U)
        prod = U @ t_matrix(3, params[0]) @ t_matrix(3, params[1])
        target = np.zeros((3, 3), dtype=complex)
        target[:2, :2] = V
        target[2, 2] = np.exp(1j * alpha)
        assert np.linalg.norm(prod - target) < 1e-10


def test_decompose_identity():
    plan = decompose(np.eye(4))
    assert all(p.is_identity for p in plan.factors)
    assert plan.alphas == (0.0,) * 4
    assert plan == DecompositionPlan.identity(4)


def test_embedded_beam_splitter_has_one_active_factor():
    B = np.eye(3, dtype=complex)
    B[:2, :2] = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    plan = decompose(B)
    active = [p for p in plan.factors if not p.is_identity]
    assert len(active) == 1
    # the first layer only nulls row 3, which the beam splitter leaves alone
    assert (active[0].layer, active[0].m) == (2, 2)
    assert np.isclose(np.cos(active[0].omega) ** 2, 0.5)
    assert np.linalg.norm(reconstruct(plan) - B) < 1e-12


@pytest.mark.parametrize("n", range(2, 9))
def test_round_trip_random(n, rng):
    err = max(np.linalg.norm(reconstruct(decompose(U)) - U)
              for U in (random_unitary(n, rng) for _ in range(100)))
    assert err < 1e-9


def test_plan_structure():
    plan = decompose(random_unitary(5, 0))
    assert [len(layer) for layer in plan.layers] == [4, 3, 2, 1]
    assert [p.m for p in plan.layers[1]] == [2, 3, 4]
    assert all(0 <= p.omega < 2 * np.pi and 0 <= p.phi < 2 * np.pi for p in plan.factors)


def test_reconstruct_examples():
    assert np.allclose(reconstruct(DecompositionPlan.identity(3)), np.eye(3))
    alphas = (0.2, 1.4, 3.0)
    plan = DecompositionPlan(3, DecompositionPlan.identity(3).layers, alphas)
    assert np.allclose(reconstruct(plan), np.diag(np.exp(1j * np.array(alphas))))


def test_plan_json_round_trip():
    plan = decompose(random_unitary(4, 9))
    assert DecompositionPlan.from_json(plan.to_json()) == plan


@pytest.mark.parametrize("data", [
    {"dim": 3, "layers": [], "alphas": [0, 0, 0]},
    {"dim": 2, "layers": [[{"m": 3, "omega": 0, "phi": 0}]], "alphas": [0, 0]},
    {"dim": 2, "alphas": [0, 0]},
    {"dim": 2, "layers": [[{"m": 2, "omega": 0}]], "alphas": [0, 0]},
])
def test_plan_json_rejects_malformed(data):
    with pytest.raises(ValidationError):
        DecompositionPlan.from_json(data)


def test_decompose_rejects_non_unitary():
    with pytest.raises(ValidationError):
        decompose(np.diag([1.0, 2.0]))


def test_wrap_angle():
    assert wrap_angle(-np.pi / 2) == pytest.approx(3 * np.pi / 2)
    assert wrap_angle(2 * np.pi) == 0.0
    assert wrap_angle(2 * np.pi - 1e-16) == 0.0
