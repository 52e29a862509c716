"""Compile decomposition plans into dual-loop control timelines and verify them.

Circuit model
-------------
Every time bin (one pulse slot, ``tau`` long) one pulse from the external side
meets the inner-loop pulse at the variable beam splitter (VBS):

1. Switch-1 selects the external-side pulse: ``through`` admits a fresh input
   pulse (or nothing), ``loop_side`` admits whatever the outer loop returns,
   adding a 180 degree phase.
2. The inner-loop pulse passes the variable phase shifter (VPS): ``e^{i theta}``.
3. The VBS exchanges a power fraction ``vbs_T`` between the inner loop and the
   external path. ``vbs_T = 1`` swaps the two pulses, ``vbs_T = 0`` leaves both
   where they are. Reflections on the phase-inverting side pick up a minus
   sign; that side is the inner one for ``vbs_T >= 0.5`` and flips to the
   external one for ``vbs_T < 0.5``.
4. Switch-2 either exports the external-side output to the detector (a common
   180 degree phase, tracked as a global phase) or keeps it in the outer loop,
   from which it returns ``N - 1`` bins later.

Logical mode 1 lives in the inner loop and logical modes 2..N are the outer-loop
slots. Layer k of the plan is played while the outer slots pass the VBS for the
k-th time; interactions a layer does not need use ``vbs_T = 0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .decomp import DecompositionPlan, TParams, t_matrix, wrap_angle
from .errors import NumericalError, RoutingError, ValidationError
from .linops import equal_up_to_phase

TAU_NS = 66.0

THROUGH = "through"
LOOP_SIDE = "loop_side"
KEEP = "keep"
EXPORT = "export"

VPS = "vps"
MEASUREMENT_BASIS = "measurement_basis"

_SNAP = 1e-14
_EPS = 1e-12


def vbs_matrix(T: float) -> np.ndarray:
    """VBS amplitudes mapping (inner in, external in) -> (inner out, external out)."""
    if not 0.0 <= T <= 1.0:
        raise ValidationError(f"VBS transmissivity {T} outside [0, 1]")
    t, r = np.sqrt(T), np.sqrt(1.0 - T)
    if T >= 0.5:
        return np.array([[-r, t], [t, r]])
    return np.array([[r, t], [t, -r]])


def bin_matrix(T: float, theta: float, s: float) -> np.ndarray:
    """Full per-bin transfer: VBS after the VPS (inner) and Switch-1 sign (external)."""
    return vbs_matrix(T) @ np.diag([np.exp(1j * theta), s])


@dataclass(frozen=True)
class TimeBin:
    index: int
    switch1: str
    switch2: str
    vbs_T: float
    vps_theta: float
    input_mode: int | None = None
    output_mode: int | None = None

    def __post_init__(self):
        if self.switch1 not in (THROUGH, LOOP_SIDE):
            raise ValidationError(f"bin {self.index}: bad switch1 {self.switch1!r}")
        if self.switch2 not in (KEEP, EXPORT):
            raise ValidationError(f"bin {self.index}: bad switch2 {self.switch2!r}")
        if not 0.0 <= self.vbs_T <= 1.0:
            raise ValidationError(f"bin {self.index}: vbs_T {self.vbs_T} outside [0, 1]")
        if not 0.0 <= self.vps_theta < 2 * np.pi:
            raise ValidationError(f"bin {self.index}: vps_theta {self.vps_theta} outside [0, 2pi)")
        if self.input_mode is not None and self.switch1 != THROUGH:
            raise ValidationError(f"bin {self.index}: inputs can only enter through Switch-1")
        if self.output_mode is not None and self.switch2 != EXPORT:
            raise ValidationError(f"bin {self.index}: output label on a non-export bin")

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "switch1": self.switch1,
            "switch2": self.switch2,
            "vbs_T": self.vbs_T,
            "vps_theta": self.vps_theta,
            "input_mode": self.input_mode,
            "output_mode": self.output_mode,
        }


@dataclass(frozen=True)
class ControlTimeline:
    """Per-bin settings realising an operation on the dual loop.

    ``homodyne_offsets[j-1]`` is the phase that output mode j still needs; with
    ``final_phase_mode == "measurement_basis"`` it is applied by rotating the
    homodyne angle instead of the VPS.
    """

    n_modes: int
    bins: tuple[TimeBin, ...]
    tau_ns: float = TAU_NS
    final_phase_mode: str = MEASUREMENT_BASIS
    homodyne_offsets: tuple[float, ...] = ()
    mode_trace: dict = field(default=None, compare=False)

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValidationError("timeline needs at least one mode")
        if self.final_phase_mode not in (VPS, MEASUREMENT_BASIS):
            raise ValidationError(f"unknown final_phase_mode {self.final_phase_mode!r}")
        if [b.index for b in self.bins] != list(range(len(self.bins))):
            raise ValidationError("bins must be indexed 0, 1, 2, ... without gaps")
        if not self.homodyne_offsets:
            object.__setattr__(self, "homodyne_offsets", tuple([0.0] * self.n_modes))
        if len(self.homodyne_offsets) != self.n_modes:
            raise ValidationError("one homodyne offset per output mode required")
        trace = route(self).trace
        if self.mode_trace is not None and \
                {int(k): list(v) for k, v in self.mode_trace.items()} != trace:
            raise RoutingError("stored mode_trace disagrees with the routing simulation")
        object.__setattr__(self, "mode_trace", trace)

    def with_bin(self, index: int, **changes) -> "ControlTimeline":
        """Copy with one bin's settings replaced (mode_trace is re-derived)."""
        bins = list(self.bins)
        bins[index] = replace(bins[index], **changes)
        return replace(self, bins=tuple(bins), mode_trace=None)

    def to_json(self) -> dict:
        return {
            "n_modes": self.n_modes,
            "tau_ns": self.tau_ns,
            "final_phase_mode": self.final_phase_mode,
            "homodyne_offsets": list(self.homodyne_offsets),
            "bins": [b.to_json() for b in self.bins],
            "mode_trace": {str(k): v for k, v in self.mode_trace.items()},
        }

    @classmethod
    def from_json(cls, data: dict) -> "ControlTimeline":
        try:
            bins = tuple(TimeBin(**b) for b in data["bins"])
            return cls(
                n_modes=int(data["n_modes"]),
                bins=bins,
                tau_ns=float(data.get("tau_ns", TAU_NS)),
                final_phase_mode=data.get("final_phase_mode", MEASUREMENT_BASIS),
                homodyne_offsets=tuple(float(x) for x in data.get("homodyne_offsets", ())),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed timeline: {exc}") from exc

    def control_table(self) -> str:
        """Fixed-width table of the control sequence, one row per bin."""
        head = (f"{'bin':>4} {'time_ns':>9} {'switch1':>9} {'switch2':>7} "
                f"{'vbs_T':>8} {'vps_theta':>9} {'in':>3} {'out':>3}")
        rows = [head]
        for b in self.bins:
            rows.append(
                f"{b.index:>4} {b.index * self.tau_ns:>9.1f} {b.switch1:>9} {b.switch2:>7} "
                f"{b.vbs_T:>8.5f} {b.vps_theta:>9.5f} "
                f"{'' if b.input_mode is None else b.input_mode:>3} "
                f"{'' if b.output_mode is None else b.output_mode:>3}"
            )
        return "\n".join(rows) + "\n"


# -- routing ------------------------------------------------------------------


@dataclass
class Routing:
    """Outcome of walking a timeline pulse by pulse.

    Registers are numbered by input mode (0-based). ``events`` is the ordered
    list of operations a simulator has to apply:

    * ``("inner_trip", reg, exempt)``: reg completed an inner round trip;
      ``exempt`` marks the trip right after loading an empty inner loop
    * ``("outer_trip", reg)``: reg completed an outer round trip
    * ``("mix", regs, M)``: regs (tuple of 1 or 2) transform by matrix M
    * ``("export", reg, label)``: reg leaves as output mode ``label``
    """

    events: list
    outputs: dict  # output label -> register
    trace: dict  # output label -> location per bin


def route(t: ControlTimeline) -> Routing:
    n = t.n_modes
    delay = max(n - 1, 1)
    inner = None
    inner_exempt = False
    outer: dict[int, int] = {}  # arrival bin -> register
    admitted: set[int] = set()
    outputs: dict[int, int] = {}
    events: list = []
    loc = {r: [] for r in range(n)}
    where = {r: "line" for r in range(n)}

    for b in t.bins:
        k = b.index
        if inner is not None:
            events.append(("inner_trip", inner, inner_exempt))
        inner_exempt = False
        returning = outer.pop(k, None)
        if returning is not None:
            events.append(("outer_trip", returning))

        if b.switch1 == THROUGH:
            if returning is not None:
                raise RoutingError(f"bin {k}: Switch-1 drops the returning outer-loop pulse")
            s = 1.0
            arriving = None
            if b.input_mode is not None:
                r = b.input_mode - 1
                if not 0 <= r < n or r in admitted:
                    raise RoutingError(f"bin {k}: input mode {b.input_mode} invalid or reused")
                admitted.add(r)
                arriving = r
        else:
            s = -1.0
            arriving = returning

        T = b.vbs_T
        exchange = T >= 0.5
        M = bin_matrix(T, b.vps_theta, s)
        if inner is not None and arriving is not None:
            order = [1, 0] if exchange else [0, 1]
            events.append(("mix", (inner, arriving), M[order, :]))
            new_inner, new_out = (arriving, inner) if exchange else (inner, arriving)
        elif inner is not None or arriving is not None:
            if _EPS < T < 1.0 - _EPS:
                raise RoutingError(f"bin {k}: partial VBS exchange with an empty slot")
            if inner is not None:
                port = 1 if exchange else 0
                events.append(("mix", (inner,), M[port:port + 1, 0:1]))
                new_inner, new_out = (None, inner) if exchange else (inner, None)
            else:
                port = 0 if exchange else 1
                events.append(("mix", (arriving,), M[port:port + 1, 1:2]))
                new_inner, new_out = (arriving, None) if exchange else (None, arriving)
                inner_exempt = exchange and b.switch1 == THROUGH
        else:
            new_inner, new_out = None, None

        inner = new_inner
        if inner is not None:
            where[inner] = "inner"
        if new_out is not None:
            if b.switch2 == EXPORT:
                label = b.output_mode
                if label is None or not 1 <= label <= n or label in outputs:
                    raise RoutingError(f"bin {k}: export needs a fresh output label 1..{n}")
                outputs[label] = new_out
                events.append(("export", new_out, label))
                where[new_out] = "out"
            else:
                outer[k + delay] = new_out
                where[new_out] = "outer"
        elif b.output_mode is not None:
            raise RoutingError(f"bin {k}: output mode {b.output_mode} exported from an empty slot")
        for r in range(n):
            loc[r].append(where[r])

    if inner is not None or outer:
        raise RoutingError("timeline ends with pulses still stored in the loops")
    if len(admitted) != n or len(outputs) != n:
        raise RoutingError(f"timeline admits {len(admitted)} and exports {len(outputs)} of {n} modes")
    return Routing(events, outputs, {label: loc[r] for label, r in sorted(outputs.items())})


def timeline_to_unitary(t: ControlTimeline, include_offsets: bool = True) -> tuple[np.ndarray, float]:
    """Recompose the mode transformation realised by a timeline.

    Returns ``(U, global_phase)`` with ``a_out[j] = sum_i U[j, i] a_in[i]``
    (output j = output label j + 1, input i = input label i + 1). Switch-2's
    common 180 degree export phase is returned separately. With
    ``include_offsets`` the homodyne offsets are applied as output phases.
    """
    n = t.n_modes
    routing = route(t)
    R = np.eye(n, dtype=complex)
    for ev in routing.events:
        if ev[0] == "mix":
            regs = list(ev[1])
            R[regs, :] = ev[2] @ R[regs, :]
    U = np.array([R[routing.outputs[j + 1]] for j in range(n)])
    if include_offsets:
        U = np.exp(1j * np.asarray(t.homodyne_offsets))[:, None] * U
    return U, float(np.pi)


@dataclass(frozen=True)
class RoundTripCounts:
    inner: tuple[int, ...]
    outer: tuple[int, ...]

    def as_dict(self) -> dict:
        return {j + 1: {"inner_trips": i, "outer_trips": o}
                for j, (i, o) in enumerate(zip(self.inner, self.outer))}


def round_trip_counts(t: ControlTimeline, charge_loading_trip: bool = False) -> RoundTripCounts:
    """Loop round trips made by the pulse ending up in each output mode.

    The trip a pulse spends in the inner loop right after being loaded into an
    empty inner loop is only counted with ``charge_loading_trip``.
    """
    routing = route(t)
    reg_to_label = {r: j for j, r in routing.outputs.items()}
    inner = [0] * t.n_modes
    outer = [0] * t.n_modes
    for ev in routing.events:
        if ev[0] == "inner_trip" and (charge_loading_trip or not ev[2]):
            inner[reg_to_label[ev[1]] - 1] += 1
        elif ev[0] == "outer_trip":
            outer[reg_to_label[ev[1]] - 1] += 1
    return RoundTripCounts(tuple(inner), tuple(outer))


# -- compilation ----------------------------------------------------------------


def _solve_interaction(p: TParams, P1: complex, Pm: complex, s: float):
    """VBS/VPS settings realising (T_{1,m})^-1 on frame phases (P1, Pm).

    Finds T, theta and new frame phases (Q1, Qm) with
    bin_matrix(T, theta, s) = diag(Q1, Qm) T^-1 diag(P1*, Pm*).
    """
    Tinv = t_matrix(2, TParams(m=2, omega=p.omega, phi=p.phi)).conj().T
    G = Tinv @ np.diag([np.conj(P1), np.conj(Pm)])
    T = float(np.cos(p.omega) ** 2)
    T = 0.0 if T < _SNAP else 1.0 if T > 1.0 - _SNAP else T
    B = vbs_matrix(T)
    col = B[:, 1] * s
    Q: list[complex | None] = [None, None]
    for i in (0, 1):
        if abs(G[i, 1]) > _EPS:
            Q[i] = col[i] / G[i, 1]
    phase = 1.0 + 0j
    for i in (0, 1):
        if Q[i] is not None and abs(G[i, 0]) > _EPS and abs(B[i, 0]) > _EPS:
            phase = Q[i] * G[i, 0] / B[i, 0]
            break
    theta = wrap_angle(np.angle(phase))
    for i in (0, 1):
        if Q[i] is None:
            Q[i] = B[i, 0] * np.exp(1j * theta) / G[i, 0]
    Q = [q / abs(q) for q in Q]
    err = np.max(np.abs(bin_matrix(T, theta, s) - np.diag(Q) @ G))
    if err > 1e-9:
        raise NumericalError(f"interaction solve mismatch {err:.3e}")
    return T, theta, Q[0], Q[1]


def interaction_bins(n: int) -> list[tuple[int, int, int]]:
    """(bin index, layer, m) for every plan factor in the standard schedule."""
    return [((k - 1) * (n - 1) + (m - 1), k, m) for k in range(1, n) for m in range(2, n - k + 2)]


def build_schedule(n: int, settings, final_thetas=None, offsets=None,
                   tau_ns: float = TAU_NS) -> ControlTimeline:
    """Lay out the standard dual-loop schedule.

    ``settings`` holds one ``(vbs_T, vps_theta)`` per plan factor in the order
    of :func:`interaction_bins`. With ``final_thetas`` every mode makes one more
    pass through the inner loop at ``vbs_T = 1`` picking up that VPS phase, and
    modes leave in order 1..N. Without, each outer slot is exported right after
    its last interaction and mode 1 leaves last.
    """
    if n < 2:
        raise ValidationError("the dual loop needs N >= 2")
    settings = list(settings)
    slots = interaction_bins(n)
    if len(settings) != len(slots):
        raise ValidationError(f"expected {len(slots)} interaction settings, got {len(settings)}")
    vps_mode = final_thetas is not None
    by_bin = {b: (k, m, st) for (b, k, m), st in zip(slots, settings)}
    bins = [TimeBin(0, THROUGH, KEEP, 1.0, 0.0, input_mode=1)]
    last = (n - 1) * (n - 1)
    for idx in range(1, last + 1):
        k, m = (idx - 1) // (n - 1) + 1, (idx - 1) % (n - 1) + 2
        present = vps_mode or k <= n - m + 1
        sw1 = THROUGH if k == 1 else LOOP_SIDE
        inp = m if k == 1 else None
        if not present:
            bins.append(TimeBin(idx, LOOP_SIDE, KEEP, 0.0, 0.0))
            continue
        T, theta = by_bin[idx][2] if idx in by_bin else (0.0, 0.0)
        done = (not vps_mode) and m == n - k + 1
        bins.append(TimeBin(idx, sw1, EXPORT if done else KEEP, float(T), wrap_angle(theta),
                            input_mode=inp, output_mode=m if done else None))
    if vps_mode:
        if len(final_thetas) != n:
            raise ValidationError("one final phase per mode required")
        for j in range(1, n + 1):
            bins.append(TimeBin(len(bins), LOOP_SIDE, EXPORT, 1.0, wrap_angle(final_thetas[j - 1]),
                                output_mode=j))
        mode = VPS
    else:
        # drop trailing bins in which nothing is left to route
        end = (n - 2) * (n - 1) + 2
        bins = bins[:end]
        bins.append(TimeBin(end, LOOP_SIDE, EXPORT, 1.0, 0.0, output_mode=1))
        mode = MEASUREMENT_BASIS
    if offsets is None:
        offsets = [0.0] * n
    return ControlTimeline(n, tuple(bins), tau_ns, mode, tuple(wrap_angle(o) for o in offsets))


def compile_plan(plan: DecompositionPlan, apply_final_phases: bool = False,
                 tau_ns: float = TAU_NS) -> ControlTimeline:
    """Translate a plan into a control timeline.

    Each interaction realises (T_{1,m})^-1 up to phases on its two output
    modes; those phases (including the Switch-1 sign) are carried forward in a
    per-mode frame and removed at the end, either by VPS passes or as homodyne
    offsets.
    """
    n = plan.dim
    if n < 2:
        raise ValidationError("the dual loop needs N >= 2")
    P = np.ones(n, dtype=complex)
    settings = []
    factors = {(p.layer, p.m): p for p in plan.factors}
    for idx in range(1, (n - 1) * (n - 1) + 1):
        k, m = (idx - 1) // (n - 1) + 1, (idx - 1) % (n - 1) + 2
        s = 1.0 if k == 1 else -1.0
        if m <= n - k + 1:
            T, theta, P[0], P[m - 1] = _solve_interaction(factors[(k, m)], P[0], P[m - 1], s)
            settings.append((T, theta))
        elif apply_final_phases:
            P[m - 1] *= -s  # bypass at vbs_T = 0 reflects on the inverting side
    alphas = np.asarray(plan.alphas)
    if apply_final_phases:
        final = []
        for j in range(n):
            final.append(alphas[j] - np.angle(P[j]))
            if j + 1 < n:
                P[j + 1] *= -1.0  # Switch-1 sign on entering the inner loop
        return build_schedule(n, settings, final_thetas=final, tau_ns=tau_ns)
    offsets = alphas - np.angle(P)
    return build_schedule(n, settings, offsets=offsets, tau_ns=tau_ns)


def bypass_timeline(n: int, tau_ns: float = TAU_NS) -> ControlTimeline:
    """Reference run: vbs_T = 0 throughout, inputs go straight to the detector."""
    bins = tuple(TimeBin(i, THROUGH, EXPORT, 0.0, 0.0, input_mode=i + 1, output_mode=i + 1)
                 for i in range(n))
    return ControlTimeline(n, bins, tau_ns, MEASUREMENT_BASIS)


def verify(t: ControlTimeline, U) -> float:
    """Max element deviation between the timeline's unitary and `U`, up to global phase."""
    V, _ = timeline_to_unitary(t)
    U = np.asarray(U, dtype=complex)
    if U.shape != V.shape:
        raise ValidationError(f"timeline acts on {V.shape[0]} modes, unitary on {U.shape[0]}")
    return equal_up_to_phase(V, U)[0]


def dumps(t: ControlTimeline) -> str:
    return json.dumps(t.to_json(), indent=2, sort_keys=True)
