"""Figures of merit for output states: nullifier variances, inseparability, fidelity."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ValidationError
from .gaussian import is_physical
from .linops import symplectic_form

INSEPARABILITY_THRESHOLD = 4.0


def db_to_variance(dB: float) -> float:
    """Quadrature variance of a squeezed quadrature at `dB` below vacuum (vacuum = 1)."""
    return float(10 ** (-dB / 10))


def variance_to_db(v: float) -> float:
    if v <= 0:
        raise ValidationError("variance must be positive")
    return float(-10 * np.log10(v))


@dataclass(frozen=True)
class QuadratureCombo:
    coefficients: tuple[float, ...]
    label: str

    def __post_init__(self):
        if not np.any(np.asarray(self.coefficients)):
            raise ValidationError("combination needs a nonzero coefficient")

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=float)


_TERM = re.compile(r"([+-]?)\s*(\d*\.?\d*)\s*\*?\s*([xp])(\d+)")


def combo(expr: str, n: int) -> QuadratureCombo:
    """Parse e.g. ``"p1 - x2 - x3"`` into a combination over (x1, p1, ..., xn, pn)."""
    c = np.zeros(2 * n)
    text = expr.replace(" ", "")
    pos = 0
    for m in _TERM.finditer(text):
        if m.start() != pos:
            raise ValidationError(f"cannot parse {expr!r}")
        pos = m.end()
        sign = -1.0 if m.group(1) == "-" else 1.0
        weight = float(m.group(2)) if m.group(2) else 1.0
        mode = int(m.group(4))
        if not 1 <= mode <= n:
            raise ValidationError(f"mode {mode} out of range in {expr!r}")
        c[2 * (mode - 1) + (m.group(3) == "p")] += sign * weight
    if pos != len(text) or not text:
        raise ValidationError(f"cannot parse {expr!r}")
    return QuadratureCombo(tuple(float(v) for v in c), expr)


def combo_variance(G, c: QuadratureCombo) -> float:
    G = np.asarray(G, dtype=float)
    v = c.vector
    if v.shape[0] != G.shape[0]:
        raise ValidationError(f"combination of length {v.shape[0]} for a {G.shape[0]}-dim covariance")
    return float(v @ G @ v)


# Inseparability parameters per operation: sums of two combo variances.
INSEPARABILITY_PAIRS = {
    "op2i": [("x1-x3", "p1+p3")],
    "op2ii": [("x2-x3", "p2+p3")],
    "op2iii": [("x1-x2", "p1+p2")],
    "op3i": [("x1-x2", "p1+p2+p3"), ("x2-x3", "p1+p2+p3")],
    "op3ii": [("x1-x2", "p1+p2+p3"), ("x2-x3", "p1+p2+p3")],
    "op3iii": [("x1-x2", "p1+p2+p3"), ("x2-x3", "p1+p2+p3")],
    "op4i": [("p1-x2-x3", "p3-x1-x2"), ("p2-x1-x3", "p3-x1-x2")],
    "op4ii": [("p1-x3", "p3-x1-x2"), ("p2-x3", "p3-x1-x2")],
}


@dataclass(frozen=True)
class InseparabilityEntry:
    combos: tuple[str, str]
    value: float
    threshold: float = INSEPARABILITY_THRESHOLD

    @property
    def passes(self) -> bool:
        return self.value < self.threshold

    @property
    def label(self) -> str:
        return f"V({self.combos[0]}) + V({self.combos[1]})"


@dataclass(frozen=True)
class InseparabilityReport:
    preset: str
    entries: tuple[InseparabilityEntry, ...]

    @property
    def passes(self) -> bool:
        return all(e.passes for e in self.entries)

    def to_json(self) -> dict:
        return {
            "preset": self.preset,
            "threshold": INSEPARABILITY_THRESHOLD,
            "entries": [{"combos": list(e.combos), "value": e.value, "passes": e.passes}
                        for e in self.entries],
        }


def inseparability(G, preset: str) -> InseparabilityReport:
    if preset not in INSEPARABILITY_PAIRS:
        raise ValidationError(f"no inseparability criterion for preset {preset!r}")
    n = np.asarray(G).shape[0] // 2
    entries = []
    for a, b in INSEPARABILITY_PAIRS[preset]:
        value = combo_variance(G, combo(a, n)) + combo_variance(G, combo(b, n))
        entries.append(InseparabilityEntry((a, b), value))
    return InseparabilityReport(preset, tuple(entries))


def is_pure(G, tol: float = 1e-10) -> bool:
    """A physical covariance is pure iff (Omega G)^2 = -I."""
    G = np.asarray(G, dtype=float)
    Om = symplectic_form(G.shape[0] // 2)
    M = Om @ G
    scale = max(1.0, float(np.linalg.norm(G, 2)) ** 2)
    return bool(np.max(np.abs(M @ M + np.eye(G.shape[0]))) <= tol * scale)


def gaussian_fidelity(G1, G2) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)))^2 of zero-mean Gaussian states.

    If either state is pure this is the overlap 2^N / sqrt(det(G1 + G2)).
    Otherwise the closed form of Banchi, Braunstein and Pirandola is used; it
    goes through a matrix square root that vanishes for pure states, so near
    purity its error grows like the square root of the input rounding error.
    """
    G1 = np.asarray(G1, dtype=float)
    G2 = np.asarray(G2, dtype=float)
    if G1.shape != G2.shape:
        raise ValidationError(f"shape mismatch {G1.shape} vs {G2.shape}")
    if not (is_physical(G1) and is_physical(G2)):
        raise ValidationError("fidelity needs physical covariance matrices")
    if is_pure(G1) or is_pure(G2):
        return float(np.clip(pure_state_fidelity(G1, G2), 0.0, 1.0))
    n = G1.shape[0] // 2
    Om = symplectic_form(n)
    eye = np.eye(2 * n)
    V1, V2 = G1 / 2, G2 / 2
    Vsum = V1 + V2
    Vaux = Om.T @ np.linalg.solve(Vsum, Om / 4 + V2 @ Om @ V1)
    A_inv = np.linalg.inv(Vaux @ Om)
    root = scipy.linalg.sqrtm(eye + A_inv @ A_inv / 4)
    F_tot = np.linalg.det(2 * (root + eye) @ Vaux)
    F = np.sqrt(np.real(F_tot) / np.linalg.det(Vsum))
    return float(np.clip(F, 0.0, 1.0))


def pure_state_fidelity(G1, G2) -> float:
    """<psi|rho|psi> for zero-mean states of which at least one is pure."""
    G1 = np.asarray(G1, dtype=float)
    n = G1.shape[0] // 2
    return float(2 ** n / np.sqrt(np.linalg.det(G1 + np.asarray(G2, dtype=float))))
