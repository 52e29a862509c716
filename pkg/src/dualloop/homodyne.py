"""Homodyne measurement pipeline: mode functions, basis sampling, covariance estimation.

Each pulse is measured along q = x cos(phi) + p sin(phi). Five three-mode
bases suffice to recover every element of a 6x6 covariance matrix:

    basis        angles (deg)    gives
    p1x2x3       90, 0, 0        var p1, var x2, var x3, cov(x2,x3), cov(x2,p1), cov(x3,p1)
    x1p2x3       0, 90, 0        ... with mode 2 in p
    x1x2p3       0, 0, 90        ... with mode 3 in p
    p1p2p3       90, 90, 90      every var p_i and cov(p_i, p_j)
    d1d2d3       45, 45, 45      var of (x_i + p_i)/sqrt2, hence cov(x_i, p_i)

The same pattern extends to N modes (N bases with one mode in p, an all-p
basis and an all-45 basis); only N = 3 is implemented.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .gaussian import is_physical, symmetrize
from .loopcompiler import TAU_NS

N_MODES = 3

BASES = {
    "p1x2x3": (90.0, 0.0, 0.0),
    "x1p2x3": (0.0, 90.0, 0.0),
    "x1x2p3": (0.0, 0.0, 90.0),
    "p1p2p3": (90.0, 90.0, 90.0),
    "d1d2d3": (45.0, 45.0, 45.0),
}
BASIS_LABELS = tuple(BASES)
DEFAULT_SAMPLES = 5000


@dataclass(frozen=True)
class ModeFunctionParams:
    """Gaussian-derivative temporal mode; times in seconds."""

    gamma: float = 6e7
    delta_t: float = 46e-9
    tau: float = TAU_NS * 1e-9
    t0: float = 0.0

    def __post_init__(self):
        if self.delta_t <= 0:
            raise ValidationError("delta_t must be positive")
        if self.gamma <= 0 or self.tau <= 0:
            raise ValidationError("gamma and tau must be positive")

    def center(self, k: int) -> float:
        return self.t0 + (k - 1) * self.tau


def mode_function(t, p: ModeFunctionParams | None = None, k: int = 1):
    """Unnormalized f_k(t) = exp(-gamma^2 (t - t_k)^2) (t - t_k) inside 2|t - t_k| <= delta_t."""
    p = ModeFunctionParams() if p is None else p
    s = np.asarray(t, dtype=float) - p.center(k)
    inside = 2 * np.abs(s) <= p.delta_t * (1 + 1e-12)  # keep the edges despite rounding in t_k
    f = np.where(inside, np.exp(-(p.gamma * s) ** 2) * s, 0.0)
    return float(f) if f.ndim == 0 else f


def normalized_mode_samples(p: ModeFunctionParams | None = None, k: int = 1,
                            dt: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Sample f_k on a grid of step `dt` covering its window, scaled so sum |f|^2 dt = 1."""
    p = ModeFunctionParams() if p is None else p
    half = int(np.floor(p.delta_t / (2 * dt) + 1e-9))
    t = p.center(k) + dt * np.arange(-half, half + 1)
    f = mode_function(t, p, k)
    norm = np.sqrt(np.sum(f ** 2) * dt)
    if norm == 0:
        raise ValidationError("mode function vanishes on the sampling grid")
    return t, f / norm


def projection(angles_deg) -> np.ndarray:
    """Rows pick x_i cos(phi_i) + p_i sin(phi_i) out of (x1, p1, ..., xN, pN)."""
    phi = np.deg2rad(np.asarray(angles_deg, dtype=float))
    n = phi.size
    B = np.zeros((n, 2 * n))
    B[np.arange(n), 2 * np.arange(n)] = np.cos(phi)
    B[np.arange(n), 2 * np.arange(n) + 1] = np.sin(phi)
    return B


def _basis_angles(basis) -> tuple[str | None, tuple[float, ...]]:
    if isinstance(basis, str):
        if basis not in BASES:
            raise ValidationError(f"unknown basis {basis!r}")
        return basis, BASES[basis]
    return None, tuple(float(a) for a in basis)


def measured_covariance(G, basis) -> np.ndarray:
    """Covariance B G B^T of the quadratures read out in `basis`."""
    _, angles = _basis_angles(basis)
    B = projection(angles)
    G = np.asarray(G, dtype=float)
    if G.shape != (B.shape[1], B.shape[1]):
        raise ValidationError(f"{len(angles)} angles for a {G.shape[0]}x{G.shape[0]} covariance")
    return symmetrize(B @ G @ B.T)


def basis_rng(seed: int, basis_index: int) -> np.random.Generator:
    """Independent counter-based stream per basis, derived from one seed."""
    child = np.random.SeedSequence(seed).spawn(basis_index + 1)[basis_index]
    return np.random.Generator(np.random.Philox(child))


def sample_quadratures(G, basis, n: int, seed: int) -> np.ndarray:
    """Draw n zero-mean samples of the homodyne outcomes; rows are shots, columns modes."""
    G = np.asarray(G, dtype=float)
    if not is_physical(G):
        raise ValidationError("cannot sample from an unphysical covariance matrix")
    if n < 1:
        raise ValidationError("sample count must be positive")
    label, _ = _basis_angles(basis)
    index = BASIS_LABELS.index(label) if label is not None else len(BASIS_LABELS)
    C = measured_covariance(G, basis)
    L = np.linalg.cholesky(C)
    z = basis_rng(seed, index).standard_normal((n, C.shape[0]))
    return z @ L.T


def sample_all_bases(G, n: int = DEFAULT_SAMPLES, seed: int = 0) -> dict[str, np.ndarray]:
    return {label: sample_quadratures(G, label, n, seed) for label in BASIS_LABELS}


def _moments(samples: dict) -> dict[str, np.ndarray]:
    out = {}
    for label in BASIS_LABELS:
        if label not in samples:
            raise ValidationError(f"missing basis {label!r}")
        s = np.asarray(samples[label], dtype=float)
        if s.ndim != 2 or s.shape[1] != N_MODES:
            raise ValidationError(f"basis {label!r}: expected an n x {N_MODES} sample array")
        if s.shape[0] < 2:
            raise ValidationError(f"basis {label!r}: need at least 2 samples")
        out[label] = np.cov(s, rowvar=False, ddof=1)
    return out


def covariance_from_moments(moments: dict) -> np.ndarray:
    """Assemble the 6x6 covariance from the per-basis 3x3 measured covariances."""
    C = {label: np.asarray(moments[label], dtype=float) for label in BASIS_LABELS}
    one_p = BASIS_LABELS[:3]
    all_p, diag = BASIS_LABELS[3], BASIS_LABELS[4]
    G = np.zeros((2 * N_MODES, 2 * N_MODES))
    x = lambda i: 2 * i
    p = lambda i: 2 * i + 1
    for i in range(N_MODES):
        G[x(i), x(i)] = np.mean([C[one_p[j]][i, i] for j in range(N_MODES) if j != i])
        G[p(i), p(i)] = np.mean([C[one_p[i]][i, i], C[all_p][i, i]])
    for i in range(N_MODES):
        for j in range(i + 1, N_MODES):
            k = 3 - i - j
            G[x(i), x(j)] = G[x(j), x(i)] = C[one_p[k]][i, j]
            G[p(i), p(j)] = G[p(j), p(i)] = C[all_p][i, j]
    for j in range(N_MODES):
        for i in range(N_MODES):
            if i != j:
                G[x(i), p(j)] = G[p(j), x(i)] = C[one_p[j]][i, j]
    for i in range(N_MODES):
        G[x(i), p(i)] = G[p(i), x(i)] = C[diag][i, i] - (G[x(i), x(i)] + G[p(i), p(i)]) / 2
    return symmetrize(G)


def estimate_covariance(samples: dict) -> np.ndarray:
    """Reconstruct the covariance from samples of all five bases (labels as in BASES)."""
    return covariance_from_moments(_moments(samples))


def samples_to_csv(samples: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["basis"] + [f"q{i}" for i in range(1, N_MODES + 1)])
    for label in BASIS_LABELS:
        if label not in samples:
            continue
        for row in np.asarray(samples[label], dtype=float):
            w.writerow([label] + [repr(float(v)) for v in row])
    return buf.getvalue()


def samples_from_csv(text: str) -> dict[str, np.ndarray]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or header[0] != "basis":
        raise ValidationError("sample CSV must start with a 'basis' header")
    rows: dict[str, list] = {}
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if row[0] not in BASES or len(row) != N_MODES + 1:
            raise ValidationError(f"line {line}: bad sample row")
        try:
            rows.setdefault(row[0], []).append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise ValidationError(f"line {line}: {exc}") from exc
    return {label: np.array(v) for label, v in rows.items()}
