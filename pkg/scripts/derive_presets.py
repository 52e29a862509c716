"""Search VBS/VPS settings for the nine three-mode presets.

Only the interactions a preset switches on are free (the others stay at
vbs_T = 1, which merely reorders pulses); the homodyne offsets are free too.
The objective is the antisqueezed leakage of each target nullifier for
lossless p-squeezed inputs, which must vanish in the infinite-squeezing limit.

    python scripts/derive_presets.py

prints the settings in the form stored in ``dualloop.presets.PRESET_SETTINGS``.
"""

import numpy as np
from scipy.optimize import least_squares

from dualloop.linops import symplectic_from_unitary
from dualloop.loopcompiler import build_schedule, timeline_to_unitary
from dualloop.metrics import combo
from dualloop.presets import ACTIVE_INTERACTIONS, NULLIFIERS

T_CHOICES = [0.5, 1 / 3, 2 / 3, 0.25, 0.75, 0.2, 0.8, 0.0, 1.0]
ANGLE_CHOICES = [k * np.pi / 4 for k in range(8)]
TOL = 1e-10


def unpack(x, active):
    settings = [(1.0, 0.0)] * 3
    for j, i in enumerate(active):
        settings[i] = (float(x[2 * j]), float(np.mod(x[2 * j + 1], 2 * np.pi)))
    offsets = [float(v) for v in np.mod(x[2 * len(active):], 2 * np.pi)]
    return settings, offsets


def leakage(settings, offsets, nullifiers):
    U, _ = timeline_to_unitary(build_schedule(3, settings, offsets=offsets))
    S = symplectic_from_unitary(U)
    res = []
    for expr in nullifiers:
        c = combo(expr, 3).vector
        res.extend((S.T @ c)[0::2] / np.linalg.norm(c))
    return np.array(res)


def _fit(x0, fixed, active, nullifiers):
    """Least squares over the entries of x0 not pinned in `fixed`."""
    free = [i for i in range(len(x0)) if i not in fixed]

    def full(y):
        x = np.array(x0, dtype=float)
        x[free] = y
        for i, v in fixed.items():
            x[i] = v
        return x

    if not free:
        x = full([])
        return x, float(np.max(np.abs(leakage(*unpack(x, active), nullifiers))))
    lo = np.array([0.0 if i < 2 * len(active) and i % 2 == 0 else -np.inf for i in free])
    hi = np.array([1.0 if i < 2 * len(active) and i % 2 == 0 else np.inf for i in free])
    y0 = np.clip(np.asarray(x0, dtype=float)[free], lo, hi)
    sol = least_squares(lambda y: leakage(*unpack(full(y), active), nullifiers), y0,
                        bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    x = full(sol.x)
    return x, float(np.max(np.abs(leakage(*unpack(x, active), nullifiers))))


def derive(name, seed=0, restarts=200):
    active = ACTIVE_INTERACTIONS[name]
    nullifiers = NULLIFIERS[name]
    size = 2 * len(active) + 3
    rng = np.random.default_rng(seed)
    best, err = None, np.inf
    for _ in range(restarts):
        x0 = rng.uniform(0, 2 * np.pi, size)
        x0[0:2 * len(active):2] = rng.uniform(0, 1, len(active))
        x, e = _fit(x0, {}, active, nullifiers)
        if e < err:
            best, err = x, e
        if err < TOL:
            break
    # Pin parameters to round values one at a time while the fit stays exact.
    fixed = {}
    for i in range(size):
        choices = T_CHOICES if i < 2 * len(active) and i % 2 == 0 else ANGLE_CHOICES
        for v in choices:
            x, e = _fit(best, {**fixed, i: v}, active, nullifiers)
            if e < TOL:
                best, fixed[i] = x, v
                break
    settings, offsets = unpack(best, active)
    return settings, offsets, float(np.max(np.abs(leakage(settings, offsets, nullifiers))))


if __name__ == "__main__":
    for name in NULLIFIERS:
        settings, offsets, err = derive(name)
        print(f"    {name!r}: ({settings!r}, {offsets!r}),  # leakage {err:.1e}")
