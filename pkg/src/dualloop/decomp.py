"""Loop-compatible triangular decomposition of an N-mode unitary.

The unitary is reduced by right-multiplication with two-mode matrices that always
couple mode 1 to mode m,

    U T(1)_{1,2} ... T(1)_{1,N} T(2)_{1,2} ... T(2)_{1,N-1} ... T(N-1)_{1,2} = D,

so that U = D (T(N-1)_{1,2})^-1 ... (T(1)_{1,2})^-1. Layer k nulls row N-k+1 of
the current matrix: the first N-k-1 factors move that row's weight into column 1,
the last one moves it into the diagonal. This is one valid ordering; any sequence
that yields the same block form gives an equally valid plan.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .linops import as_unitary

TWO_PI = 2.0 * np.pi
_ZERO = 1e-14


def wrap_angle(a: float) -> float:
    """Map an angle into [0, 2 pi)."""
    w = float(np.mod(a, TWO_PI))
    return 0.0 if w >= TWO_PI or np.isclose(w, TWO_PI, rtol=0.0, atol=1e-15) else w


@dataclass(frozen=True)
class TParams:
    """Angles of one two-mode factor T_{l,m} in layer `layer` (modes are 1-based)."""

    m: int
    omega: float
    phi: float
    layer: int = 1
    l: int = 1

    def __post_init__(self):
        if self.l != 1 or self.m <= self.l:
            raise ValidationError(f"invalid mode pair ({self.l}, {self.m})")
        if self.layer < 1:
            raise ValidationError("layer index must be >= 1")

    @property
    def is_identity(self) -> bool:
        return bool(np.isclose(np.sin(self.omega), 1.0, atol=1e-12)
                    and np.isclose(np.cos(self.phi), 1.0, atol=1e-12))


def t_matrix(n: int, p: TParams) -> np.ndarray:
    """The N x N matrix T_{l,m}: identity except for the (l, m) 2x2 block."""
    if not 1 <= p.l < p.m <= n:
        raise ValidationError(f"mode pair ({p.l}, {p.m}) out of range for N={n}")
    T = np.eye(n, dtype=complex)
    l, m = p.l - 1, p.m - 1
    e = np.exp(1j * p.phi)
    # exact zeros at multiples of pi/2 keep identity and swap factors exact
    c, s = (0.0 if abs(v) < 1e-15 else v for v in (np.cos(p.omega), np.sin(p.omega)))
    T[l, l] = e * s
    T[l, m] = -e * c
    T[m, l] = c
    T[m, m] = s
    return T


def _phase(z: complex) -> float:
    return float(np.angle(z)) if abs(z) > _ZERO else 0.0


def _null_into_first(a: complex, b: complex) -> tuple[float, float]:
    # angles zeroing -e^{i phi} cos(w) a + sin(w) b
    if abs(a) <= _ZERO and abs(b) <= _ZERO:
        return np.pi / 2, 0.0
    if abs(b) <= _ZERO:
        return np.pi / 2, 0.0
    omega = float(np.arctan2(abs(a), abs(b)))
    return omega, _phase(b) - _phase(a)


def _null_into_diagonal(a: complex, b: complex) -> tuple[float, float]:
    # angles zeroing e^{i phi} sin(w) a + cos(w) b
    if abs(a) <= _ZERO:
        return np.pi / 2, 0.0
    if abs(b) <= _ZERO:
        return 0.0, 0.0
    omega = float(np.arctan2(abs(b), abs(a)))
    return omega, _phase(b) - _phase(a) + np.pi


def reduce_step(U, layer: int = 1) -> tuple[list[TParams], np.ndarray, float]:
    """Peel the last mode off `U`.

    Returns the factors T_{1,2} ... T_{1,n} (in multiplication order), the
    remaining (n-1)-dimensional unitary and the phase alpha_n such that
    U T_{1,2} ... T_{1,n} = diag(U_reduced, e^{i alpha_n}).
    """
    V = as_unitary(U).copy()
    n = V.shape[0]
    if n < 2:
        raise ValidationError("reduce_step needs N >= 2")
    r = n - 1
    params = []
    for m in range(2, n + 1):
        j = m - 1
        a, b = V[r, 0], V[r, j]
        if m < n:
            omega, phi = _null_into_first(a, b)
        else:
            omega, phi = _null_into_diagonal(a, b)
        p = TParams(m=m, omega=wrap_angle(omega), phi=wrap_angle(phi), layer=layer)
        V = V @ t_matrix(n, p)
        params.append(p)
    residual = max(np.max(np.abs(V[r, :r])), np.max(np.abs(V[:r, r])))
    if residual > 1e-8:
        raise NumericalError(f"nulling left a residual of {residual:.3e}")
    return params, V[:r, :r].copy(), float(np.angle(V[r, r]))


@dataclass(frozen=True)
class DecompositionPlan:
    """Ordered T-factor angles plus the diagonal phases alpha_1..alpha_N."""

    dim: int
    layers: tuple[tuple[TParams, ...], ...]
    alphas: tuple[float, ...]

    def __post_init__(self):
        n = self.dim
        if n < 1 or len(self.alphas) != n or len(self.layers) != max(n - 1, 0):
            raise ValidationError("plan shape does not match its dimension")
        for k, layer in enumerate(self.layers, start=1):
            ms = [p.m for p in layer]
            if ms != list(range(2, n - k + 2)):
                raise ValidationError(f"layer {k} must cover m = 2..{n - k + 1}, got {ms}")
            if any(p.layer != k for p in layer):
                raise ValidationError(f"layer {k} carries mislabelled factors")

    @property
    def factors(self) -> list[TParams]:
        """All factors in multiplication order T(1)_{1,2}, ..., T(N-1)_{1,2}."""
        return [p for layer in self.layers for p in layer]

    @classmethod
    def identity(cls, n: int) -> "DecompositionPlan":
        layers = tuple(
            tuple(TParams(m=m, omega=np.pi / 2, phi=0.0, layer=k) for m in range(2, n - k + 2))
            for k in range(1, n)
        )
        return cls(n, layers, tuple([0.0] * n))

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "layers": [[{"m": p.m, "omega": p.omega, "phi": p.phi} for p in layer]
                       for layer in self.layers],
            "alphas": list(self.alphas),
        }

    @classmethod
    def from_json(cls, data: dict) -> "DecompositionPlan":
        try:
            layers = tuple(
                tuple(TParams(m=int(p["m"]), omega=float(p["omega"]), phi=float(p["phi"]), layer=k)
                      for p in layer)
                for k, layer in enumerate(data["layers"], start=1)
            )
            return cls(int(data["dim"]), layers, tuple(float(a) for a in data["alphas"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed plan: {exc}") from exc


def decompose(U) -> DecompositionPlan:
    """Factor `U` into the dual-loop compatible product of T matrices and D."""
    V = as_unitary(U)
    n = V.shape[0]
    layers = []
    alphas = [0.0] * n
    for k in range(1, n):
        params, V, alpha = reduce_step(V, layer=k)
        layers.append(tuple(params))
        alphas[n - k] = wrap_angle(alpha)
    alphas[0] = wrap_angle(np.angle(V[0, 0]))
    return DecompositionPlan(n, tuple(layers), tuple(alphas))


def reconstruct(plan: DecompositionPlan) -> np.ndarray:
    """Evaluate D (T(N-1)_{1,2})^-1 ... (T(1)_{1,2})^-1."""
    n = plan.dim
    U = np.diag(np.exp(1j * np.asarray(plan.alphas)))
    for p in reversed(plan.factors):
        U = U @ t_matrix(n, p).conj().T
    return U
