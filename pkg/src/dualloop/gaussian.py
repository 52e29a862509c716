"""Covariance-matrix simulation of squeezed pulses through the dual loop."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .linops import symplectic_form, symplectic_from_unitary
from .loopcompiler import ControlTimeline, route

PHYSICAL_TOL = 1e-8


@dataclass(frozen=True)
class LossModel:
    """Loss fractions of the setup.

    ``source_detection_loss`` lumps generation, propagation and readout and is
    applied once per pulse; the trip losses are charged per completed loop
    round trip. ``charge_loading_trip`` also charges the inner trip a pulse
    makes right after being loaded into an empty inner loop (the calibration
    of the default numbers does not count it).
    """

    source_detection_loss: float = 0.23
    inner_trip_loss: float = 0.15
    outer_trip_loss: float = 0.20
    input_squeezing_dB: float = 7.4
    charge_loading_trip: bool = False

    def __post_init__(self):
        for name in ("source_detection_loss", "inner_trip_loss", "outer_trip_loss"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} = {v} outside [0, 1]")
        if self.input_squeezing_dB < 0:
            raise ValidationError("input squeezing must be >= 0 dB")

    @classmethod
    def lossless(cls, squeezing_dB: float = 7.4) -> "LossModel":
        return cls(0.0, 0.0, 0.0, squeezing_dB)

    def without_loop_losses(self) -> "LossModel":
        return LossModel(self.source_detection_loss, 0.0, 0.0, self.input_squeezing_dB,
                         self.charge_loading_trip)


def squeezed_vacuum_cov(squeezing_dB: float, squeezed_quadrature: str = "p") -> np.ndarray:
    """Single-mode pure squeezed vacuum, vacuum variance 1."""
    if squeezing_dB < 0:
        raise ValidationError("squeezing must be >= 0 dB")
    lo, hi = 10 ** (-squeezing_dB / 10), 10 ** (squeezing_dB / 10)
    if squeezed_quadrature == "p":
        return np.diag([hi, lo])
    if squeezed_quadrature == "x":
        return np.diag([lo, hi])
    raise ValidationError(f"squeezed quadrature must be 'x' or 'p', not {squeezed_quadrature!r}")


def vacuum_cov(n: int) -> np.ndarray:
    return np.eye(2 * n)


def _check_cov(G) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] % 2:
        raise ValidationError(f"covariance matrix must be 2N x 2N, got {G.shape}")
    return G


def symmetrize(G: np.ndarray) -> np.ndarray:
    return 0.5 * (G + G.T)


def physicality(G) -> float:
    """Smallest eigenvalue of G + i Omega (>= 0 for a physical state)."""
    G = _check_cov(G)
    return float(np.min(np.linalg.eigvalsh(G + 1j * symplectic_form(G.shape[0] // 2))))


def is_physical(G, tol: float = PHYSICAL_TOL) -> bool:
    G = _check_cov(G)
    return bool(np.allclose(G, G.T, atol=1e-10) and physicality(G) >= -tol)


def apply_symplectic(G, S) -> np.ndarray:
    G = _check_cov(G)
    S = np.asarray(S, dtype=float)
    if S.shape != G.shape:
        raise ValidationError(f"symplectic {S.shape} does not match covariance {G.shape}")
    return symmetrize(S @ G @ S.T)


def apply_loss(G, mode: int, loss: float) -> np.ndarray:
    """Pure-loss channel on one mode (0-based): vacuum admixture with fraction `loss`."""
    G = _check_cov(G)
    if not 0.0 <= loss <= 1.0:
        raise ValidationError(f"loss {loss} outside [0, 1]")
    n = G.shape[0] // 2
    if not 0 <= mode < n:
        raise ValidationError(f"mode {mode} out of range for {n} modes")
    scale = np.ones(2 * n)
    scale[2 * mode:2 * mode + 2] = np.sqrt(1.0 - loss)
    out = G * np.outer(scale, scale)
    out[2 * mode:2 * mode + 2, 2 * mode:2 * mode + 2] += loss * np.eye(2)
    return symmetrize(out)


def direct_sum(*blocks) -> np.ndarray:
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size))
    i = 0
    for b in blocks:
        k = b.shape[0]
        out[i:i + k, i:i + k] = b
        i += k
    return out


def input_state(n: int, inputs=None, squeezing_dB: float = 7.4) -> np.ndarray:
    """Product state of the input pulses.

    `inputs` is None (all p-squeezed at `squeezing_dB`), or one entry per mode:
    a squeezing level in dB (p-squeezed) or an explicit 2x2 covariance.
    """
    if inputs is None:
        inputs = [squeezing_dB] * n
    if len(inputs) != n:
        raise ValidationError(f"{len(inputs)} input specs for {n} modes")
    blocks = []
    for spec in inputs:
        if np.ndim(spec) == 0:
            blocks.append(squeezed_vacuum_cov(float(spec)))
        else:
            block = _check_cov(spec)
            if block.shape != (2, 2):
                raise ValidationError("per-mode input covariance must be 2x2")
            blocks.append(block)
    return direct_sum(*blocks)


def _embed(n: int, regs, M) -> np.ndarray:
    U = np.eye(n, dtype=complex)
    idx = np.asarray(regs)
    U[np.ix_(idx, idx)] = M
    return U


def _phase_lift(phases) -> np.ndarray:
    return symplectic_from_unitary(np.diag(np.exp(1j * np.asarray(phases, dtype=float))))


def simulate(t: ControlTimeline, inputs=None, lm: LossModel | None = None,
             check_every_step: bool = False) -> np.ndarray:
    """Output covariance (ordered by output mode) of a timeline run.

    Pulses pick up the source/detection loss once, then every mix, phase and
    loop round trip in the order the routing produces them. Homodyne offsets
    are applied as output phase rotations.
    """
    lm = LossModel() if lm is None else lm
    n = t.n_modes
    G = input_state(n, inputs, lm.input_squeezing_dB)
    for r in range(n):
        G = apply_loss(G, r, lm.source_detection_loss)
    routing = route(t)
    for ev in routing.events:
        kind = ev[0]
        if kind == "mix":
            G = apply_symplectic(G, symplectic_from_unitary(_embed(n, ev[1], ev[2])))
        elif kind == "inner_trip":
            if lm.charge_loading_trip or not ev[2]:
                G = apply_loss(G, ev[1], lm.inner_trip_loss)
        elif kind == "outer_trip":
            G = apply_loss(G, ev[1], lm.outer_trip_loss)
        if check_every_step and physicality(G) < -PHYSICAL_TOL:
            raise NumericalError(f"state became unphysical after {ev[0]}")
    order = [routing.outputs[j + 1] for j in range(n)]
    idx = np.array([[2 * r, 2 * r + 1] for r in order]).ravel()
    G = G[np.ix_(idx, idx)]
    G = apply_symplectic(G, _phase_lift(t.homodyne_offsets))
    if physicality(G) < -PHYSICAL_TOL:
        raise NumericalError("simulated output covariance is unphysical")
    return G


def quadrature_labels(n: int) -> list[str]:
    return [f"{q}{i}" for i in range(1, n + 1) for q in ("x", "p")]


def cov_to_csv(G) -> str:
    G = _check_cov(G)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(quadrature_labels(G.shape[0] // 2))
    for row in G:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def cov_from_csv(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    try:
        G = np.array([[float(v) for v in row] for row in rows[1:] if row])
    except ValueError as exc:
        raise ValidationError(f"malformed covariance CSV: {exc}") from exc
    return _check_cov(G)


def cov_to_json(G) -> dict:
    G = _check_cov(G)
    return {"labels": quadrature_labels(G.shape[0] // 2), "matrix": G.tolist()}


def cov_elements(G) -> list[dict]:
    """Flat element list (row label, column label, value) for external plotting."""
    G = _check_cov(G)
    labels = quadrature_labels(G.shape[0] // 2)
    return [{"row": labels[i], "col": labels[j], "value": float(G[i, j])}
            for i in range(len(labels)) for j in range(len(labels))]
