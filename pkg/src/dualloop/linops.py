"""Complex linear algebra for passive linear optics.

Quadratures follow x = a + a^dagger, p = -i a + i a^dagger (hbar = 2, vacuum
variance 1) and all real phase-space matrices use the interleaved ordering
(x1, p1, x2, p2, ...).
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError, ValidationError

HBAR = 2.0
VACUUM_VARIANCE = 1.0

UNITARY_TOL = 1e-10
COMPARE_TOL = 1e-9


def _square(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {M.shape}")
    return M


def is_unitary(M, tol: float = UNITARY_TOL) -> bool:
    """Return True iff ||M M^dagger - I||_F <= tol."""
    M = _square(M)
    err = np.linalg.norm(M @ M.conj().T - np.eye(M.shape[0]))
    return bool(err <= tol)


def as_unitary(M, tol: float = UNITARY_TOL) -> np.ndarray:
    """Validate and return `M` as a complex unitary array."""
    M = _square(np.asarray(M, dtype=complex))
    if not is_unitary(M, tol):
        err = np.linalg.norm(M @ M.conj().T - np.eye(M.shape[0]))
        raise ValidationError(f"matrix is not unitary (||UU^dagger - I||_F = {err:.3e})")
    return M


def symplectic_form(n: int) -> np.ndarray:
    """Standard symplectic form for `n` modes in interleaved ordering."""
    if n < 1:
        raise ValidationError("number of modes must be >= 1")
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _interleave_to_block(n: int) -> np.ndarray:
    # A[i, j] = 1 for odd j (1-based) at i = (j+1)/2 and for even j at i = n + j/2
    A = np.zeros((2 * n, 2 * n))
    for j in range(1, 2 * n + 1):
        i = (j + 1) // 2 if j % 2 else n + j // 2
        A[i - 1, j - 1] = 1.0
    return A


def _ladder_transform(n: int) -> np.ndarray:
    eye = np.eye(n)
    return np.block([[eye, 1j * eye], [eye, -1j * eye]])


def symplectic_from_unitary(U) -> np.ndarray:
    """Lift an N-mode unitary to its 2N x 2N quadrature transformation.

    Computes S = (W A)^{-1} diag(U, U*) W A, where A reorders the interleaved
    quadrature vector into (x..., p...) and W maps that onto (2a..., 2a^dagger...).
    The result is real, symplectic and orthogonal.
    """
    U = as_unitary(U)
    n = U.shape[0]
    WA = _ladder_transform(n) @ _interleave_to_block(n)
    big = np.zeros((2 * n, 2 * n), dtype=complex)
    big[:n, :n] = U
    big[n:, n:] = U.conj()
    S = np.linalg.solve(WA, big @ WA)
    residue = np.max(np.abs(S.imag))
    if residue > 1e-8:
        raise NumericalError(f"symplectic lift has imaginary residue {residue:.3e}")
    return np.ascontiguousarray(S.real)


def is_symplectic(S, tol: float = UNITARY_TOL) -> bool:
    S = _square(np.asarray(S, dtype=float))
    if S.shape[0] % 2:
        return False
    Om = symplectic_form(S.shape[0] // 2)
    return bool(np.linalg.norm(S @ Om @ S.T - Om) <= tol)


def p_flip(n: int) -> np.ndarray:
    """Per-mode p -> -p reflection; conjugating a lift by it lifts U*."""
    return np.kron(np.eye(n), np.diag([1.0, -1.0]))


def phase_unitary(phases) -> np.ndarray:
    return np.diag(np.exp(1j * np.asarray(phases, dtype=float)))


def random_unitary(n: int, rng: np.random.Generator | int | None = None) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix with phase-fixed R."""
    rng = np.random.default_rng(rng)
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def equal_up_to_phase(A, B) -> tuple[float, float]:
    """Return (max deviation, phase) minimising ||A - e^{i phase} B||."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.shape != B.shape:
        raise ValidationError(f"shape mismatch {A.shape} vs {B.shape}")
    overlap = np.vdot(B, A)
    phase = float(np.angle(overlap)) if abs(overlap) > 0 else 0.0
    return float(np.max(np.abs(A - np.exp(1j * phase) * B))), phase


def complex_to_json(M) -> list:
    """Row-major nested lists of [re, im] pairs."""
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def complex_from_json(data) -> np.ndarray:
    if isinstance(data, dict):
        data = data.get("matrix", data.get("unitary"))
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"malformed complex matrix: {exc}") from exc
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValidationError("complex matrix must be rows of [re, im] pairs")
    return _square(arr[..., 0] + 1j * arr[..., 1])
