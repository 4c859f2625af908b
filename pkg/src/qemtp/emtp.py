"""Fixed-step nodal transient engine.

Every element is reduced to a trapezoidal Norton companion: a conductance in
parallel with a history current source.  The branch law used throughout is

    i = G * u + J

with ``u = v[from] - v[to]`` and ``i`` flowing from ``from_node`` to
``to_node``.  ``J`` is the ``history_current`` of :class:`NortonEquivalent`,
so the nodal right-hand side receives ``-J`` at ``from_node`` and ``+J`` at
``to_node``.

Switches use the fixed admittance switch model: a constant conductance
``Y_sw`` whose state lives only in its history source, which keeps the
admittance matrix identical across switching events.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from .errors import AssemblyError, DimensionError, InvalidParameterError, SolverError

__all__ = [
    "BranchKind", "Branch", "NortonEquivalent", "FasmParams", "SourceFunction",
    "DutyCyclePwm", "SineTrianglePwm", "NetworkModel", "Waveform", "StepResult",
    "discretize_branch", "fasm_history_current", "assemble_admittance",
    "injection_vector", "classical_solve", "pwm_gate_signal", "TransientStepper",
    "run_classical", "stored_energy",
]

GROUND = 0
DEFAULT_SOURCE_RESISTANCE = 1e-3
CONDITION_LIMIT = 1e13
RESIDUAL_LIMIT = 1e-12


class BranchKind(str, Enum):
    RESISTOR = "R"
    INDUCTOR = "L"
    CAPACITOR = "C"
    VOLTAGE_SOURCE = "V"
    CURRENT_SOURCE = "I"
    SWITCH = "SW"


@dataclass(frozen=True)
class SourceFunction:
    """Time function for source branches: ``dc`` or ``sine`` (phase in degrees)."""

    kind: str = "dc"
    amplitude: float = 0.0
    freq: float = 0.0
    phase_deg: float = 0.0

    def __post_init__(self):
        if self.kind not in ("dc", "sine"):
            raise InvalidParameterError(f"unknown source waveform {self.kind!r}")
        if self.kind == "sine" and self.freq <= 0:
            raise InvalidParameterError("sine source needs a positive frequency")

    def __call__(self, t: float) -> float:
        if self.kind == "dc":
            return self.amplitude
        return self.amplitude * math.sin(2 * math.pi * self.freq * t + math.radians(self.phase_deg))


@dataclass(frozen=True)
class Branch:
    """One two-terminal element.

    ``value`` is ohms, henries or farads for R/L/C, the series resistance for
    a voltage source, and unused for current sources and switches.  A switch
    names its gate in ``control`` and sets ``complement`` for the lower device
    of a complementary pair.
    """

    id: str
    kind: BranchKind
    from_node: int
    to_node: int
    value: float = 0.0
    source: SourceFunction | None = None
    control: str | None = None
    complement: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", BranchKind(self.kind))
        if self.from_node == self.to_node:
            raise InvalidParameterError(f"branch {self.id}: from_node equals to_node")
        if min(self.from_node, self.to_node) < 0:
            raise InvalidParameterError(f"branch {self.id}: negative node index")
        if self.kind in (BranchKind.RESISTOR, BranchKind.INDUCTOR, BranchKind.CAPACITOR,
                         BranchKind.VOLTAGE_SOURCE):
            if not self.value > 0 or not math.isfinite(self.value):
                raise InvalidParameterError(f"branch {self.id}: value must be positive, got {self.value}")
        if self.kind in (BranchKind.VOLTAGE_SOURCE, BranchKind.CURRENT_SOURCE) and self.source is None:
            raise InvalidParameterError(f"branch {self.id}: source branch needs a time function")
        if self.kind is BranchKind.SWITCH and self.control is None:
            raise InvalidParameterError(f"switch {self.id} has no gate signal")


@dataclass(frozen=True)
class NortonEquivalent:
    conductance: float
    history_current: float


@dataclass(frozen=True)
class FasmParams:
    alpha_on: float
    beta_on: float
    alpha_off: float
    beta_off: float
    y_sw: float

    def __post_init__(self):
        if self.beta_on != -1.0:
            raise InvalidParameterError("beta_on must be exactly -1")
        if self.alpha_off != 1.0:
            raise InvalidParameterError("alpha_off must be exactly 1")
        if self.alpha_on == 1.0:
            raise InvalidParameterError("alpha_on must differ from 1")
        if self.beta_off == -1.0:
            raise InvalidParameterError("beta_off must differ from -1")
        if not self.y_sw > 0:
            raise InvalidParameterError("y_sw must be positive")

    @classmethod
    def damped(cls, y_sw: float = 1.0) -> FasmParams:
        """Shortest-transient damping set."""
        root2 = math.sqrt(2.0)
        return cls(-1.0 - root2, -1.0, 1.0, 1.0 - root2, y_sw)

    @classmethod
    def from_lc(cls, inductance: float, capacitance: float) -> FasmParams:
        if inductance <= 0 or capacitance <= 0:
            raise InvalidParameterError("L and C must be positive")
        return cls.damped(math.sqrt(capacitance / inductance))


@dataclass(frozen=True)
class DutyCyclePwm:
    freq: float
    duty: float
    phase: float = 0.0  # fraction of a period

    def __post_init__(self):
        if not 0 < self.duty < 1:
            raise InvalidParameterError("duty must lie strictly between 0 and 1")
        if self.freq <= 0:
            raise InvalidParameterError("PWM frequency must be positive")


@dataclass(frozen=True)
class SineTrianglePwm:
    carrier_freq: float
    ref_freq: float
    mod_index: float
    phase_deg: float = 0.0

    def __post_init__(self):
        if not 0 < self.mod_index <= 1:
            raise InvalidParameterError("modulation index must lie in (0, 1]")
        if self.carrier_freq <= 0 or self.ref_freq <= 0:
            raise InvalidParameterError("carrier and reference frequencies must be positive")

    def carrier(self, t):
        # triangle between -1 and 1, peak at t = 0
        return 4.0 * np.abs(np.mod(np.asarray(t) * self.carrier_freq, 1.0) - 0.5) - 1.0

    def reference(self, t):
        return self.mod_index * np.sin(2 * np.pi * self.ref_freq * np.asarray(t) + np.radians(self.phase_deg))


PwmScheme = DutyCyclePwm | SineTrianglePwm


def pwm_gate_signal(t: float, scheme: PwmScheme) -> tuple[bool, bool]:
    """Gate states ``(upper, lower)`` of a complementary pair at time ``t``."""
    if isinstance(scheme, DutyCyclePwm):
        upper = (t * scheme.freq + scheme.phase) % 1.0 < scheme.duty
    elif isinstance(scheme, SineTrianglePwm):
        upper = bool(scheme.reference(t) > scheme.carrier(t))
    else:
        raise InvalidParameterError(f"unknown PWM scheme {scheme!r}")
    return bool(upper), not upper


def fasm_history_current(on: bool, prev_voltage: float, prev_current: float, params: FasmParams) -> float:
    """History source of a fixed admittance switch.

    The switch current is ``Y_sw * U - I_h``, so the source pushes ``I_h``
    into ``from_node``.  At a fixed point the on state forces ``U = 0`` and
    the off state forces ``I = 0``.
    """
    if on:
        alpha, beta = params.alpha_on, params.beta_on
    else:
        alpha, beta = params.alpha_off, params.beta_off
    return alpha * params.y_sw * prev_voltage + beta * prev_current


def discretize_branch(branch: Branch, dt: float, prev_voltage: float = 0.0, prev_current: float = 0.0,
                      *, t: float = 0.0, switch_on: bool = False,
                      fasm: FasmParams | None = None) -> NortonEquivalent:
    """Trapezoidal Norton companion of ``branch`` for the step ending at ``t``."""
    if not dt > 0:
        raise InvalidParameterError(f"time step must be positive, got {dt}")
    kind = branch.kind
    if kind is BranchKind.RESISTOR:
        return NortonEquivalent(1.0 / branch.value, 0.0)
    if kind is BranchKind.INDUCTOR:
        g = dt / (2.0 * branch.value)
        return NortonEquivalent(g, prev_current + g * prev_voltage)
    if kind is BranchKind.CAPACITOR:
        g = 2.0 * branch.value / dt
        return NortonEquivalent(g, -prev_current - g * prev_voltage)
    if kind is BranchKind.VOLTAGE_SOURCE:
        g = 1.0 / branch.value
        return NortonEquivalent(g, -g * branch.source(t))
    if kind is BranchKind.CURRENT_SOURCE:
        return NortonEquivalent(0.0, branch.source(t))
    if fasm is None:
        raise InvalidParameterError(f"switch {branch.id} needs FASM parameters")
    return NortonEquivalent(fasm.y_sw, -fasm_history_current(switch_on, prev_voltage, prev_current, fasm))


@dataclass(frozen=True)
class NetworkModel:
    """Immutable network description; node 0 is ground and is not listed."""

    node_names: tuple[str, ...]
    branches: tuple[Branch, ...]
    gates: Mapping[str, PwmScheme] = field(default_factory=dict)
    fasm: FasmParams | None = None
    settings: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "node_names", tuple(self.node_names))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "gates", dict(self.gates))
        object.__setattr__(self, "settings", dict(self.settings))
        n = len(self.node_names)
        if n < 1:
            raise InvalidParameterError("network needs at least one non-ground node")
        ids = [b.id for b in self.branches]
        if len(set(ids)) != len(ids):
            raise InvalidParameterError("branch identifiers must be unique")
        for b in self.branches:
            if max(b.from_node, b.to_node) > n:
                raise InvalidParameterError(f"branch {b.id} refers to a node beyond {n}")
            if b.kind is BranchKind.SWITCH:
                if b.control not in self.gates:
                    raise InvalidParameterError(f"switch {b.id} uses undefined gate {b.control!r}")
                if self.fasm is None:
                    raise InvalidParameterError("network has switches but no FASM parameters")

    @property
    def node_count(self) -> int:
        return len(self.node_names)

    @property
    def switches(self) -> tuple[Branch, ...]:
        return tuple(b for b in self.branches if b.kind is BranchKind.SWITCH)

    def branch(self, branch_id: str) -> Branch:
        for b in self.branches:
            if b.id == branch_id:
                return b
        raise KeyError(branch_id)

    def switch_states(self, t: float) -> dict[str, bool]:
        states = {}
        for b in self.switches:
            upper, lower = pwm_gate_signal(t, self.gates[b.control])
            states[b.id] = lower if b.complement else upper
        return states


def _conductance(branch: Branch, dt: float, fasm: FasmParams | None) -> float:
    if branch.kind is BranchKind.SWITCH:
        return fasm.y_sw
    return discretize_branch(branch, dt, t=0.0, fasm=fasm).conductance


def assemble_admittance(network: NetworkModel, switch_states: Mapping[str, bool] | None = None,
                        dt: float | None = None) -> np.ndarray:
    """Nodal admittance matrix with the ground row and column removed.

    Switch states are accepted for interface symmetry; under the fixed
    admittance model they do not change the result.
    """
    dt = float(network.settings.get("dt", 0.0)) if dt is None else dt
    if not dt > 0:
        raise InvalidParameterError("time step must be positive")
    n = network.node_count
    g = np.zeros((n + 1, n + 1))
    for b in network.branches:
        y = _conductance(b, dt, network.fasm)
        if y == 0.0:
            continue
        k, m = b.from_node, b.to_node
        g[k, k] += y
        g[m, m] += y
        g[k, m] -= y
        g[m, k] -= y
    isolated = _floating_nodes(network, g)
    if isolated:
        names = ", ".join(network.node_names[k - 1] for k in isolated)
        raise AssemblyError(f"admittance matrix is singular; no conductive path to ground from: {names}")
    return g[1:, 1:]


def _floating_nodes(network: NetworkModel, g: np.ndarray) -> list[int]:
    n = network.node_count
    reached = {GROUND}
    frontier = [GROUND]
    while frontier:
        k = frontier.pop()
        for m in np.nonzero(g[k])[0]:
            m = int(m)
            if m not in reached:
                reached.add(m)
                frontier.append(m)
    return [k for k in range(1, n + 1) if k not in reached]


def injection_vector(network: NetworkModel, history: Sequence[float]) -> np.ndarray:
    """Nodal right-hand side from per-branch history currents ``J``."""
    rhs = np.zeros(network.node_count + 1)
    for b, j in zip(network.branches, history):
        rhs[b.from_node] -= j
        rhs[b.to_node] += j
    return rhs[1:]


def classical_solve(g, i) -> np.ndarray:
    """Dense LU solve with a relative residual guarantee of ``1e-12``."""
    g = np.asarray(g, dtype=float)
    i = np.asarray(i, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or i.shape != (g.shape[0],):
        raise DimensionError("classical_solve expects a square matrix and a matching vector")
    cond = float(np.linalg.cond(g))
    if not math.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SolverError(f"matrix is singular or ill-conditioned (condition estimate {cond:.3e})")
    norm_i = float(np.linalg.norm(i))
    if norm_i == 0.0:
        return np.zeros_like(i)
    v = np.linalg.solve(g, i)
    for _ in range(2):
        r = i - g @ v
        if np.linalg.norm(r) <= RESIDUAL_LIMIT * norm_i:
            break
        v = v + np.linalg.solve(g, r)
    else:
        res = np.linalg.norm(i - g @ v) / norm_i
        if res > RESIDUAL_LIMIT:
            raise SolverError(f"residual {res:.3e} above {RESIDUAL_LIMIT:g} (condition estimate {cond:.3e})")
    return v


@dataclass
class Waveform:
    time: np.ndarray
    channels: dict[str, np.ndarray]

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=float)
        for name, col in self.channels.items():
            col = np.asarray(col, dtype=float)
            if col.shape != self.time.shape:
                raise DimensionError(f"channel {name} has {col.size} samples, time axis has {self.time.size}")
            self.channels[name] = col

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    @property
    def dt(self) -> float:
        return float(self.time[1] - self.time[0]) if self.time.size > 1 else 0.0

    def to_csv(self, path) -> None:
        names = list(self.channels)
        data = np.column_stack([self.time] + [self.channels[k] for k in names])
        with open(path, "w", newline="") as fh:
            fh.write(",".join(["t"] + names) + "\n")
            np.savetxt(fh, data, fmt="%.16e", delimiter=",")

    @classmethod
    def from_csv(cls, path) -> Waveform:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0][0] != "t":
            raise InvalidParameterError(f"{path}: first column must be 't'")
        data = np.array(rows[1:], dtype=float).reshape(len(rows) - 1, len(rows[0]))
        return cls(data[:, 0], {name: data[:, k] for k, name in enumerate(rows[0][1:], start=1)})


@dataclass
class StepResult:
    t: float
    g: np.ndarray
    rhs: np.ndarray
    states: dict[str, bool]


class TransientStepper:
    """Advances one network through fixed steps with a pluggable nodal solver.

    ``initial`` maps branch ids to ``(voltage, current)`` at ``t = 0``.
    """

    def __init__(self, network: NetworkModel, dt: float, initial: Mapping[str, tuple[float, float]] | None = None):
        if not dt > 0:
            raise InvalidParameterError("time step must be positive")
        self.network = network
        self.dt = dt
        self.g = assemble_admittance(network, None, dt)
        nb = len(network.branches)
        self.u = np.zeros(nb)
        self.i = np.zeros(nb)
        self.v = np.zeros(network.node_count)
        for k, b in enumerate(network.branches):
            if initial and b.id in initial:
                self.u[k], self.i[k] = initial[b.id]
        self._cond = [_conductance(b, dt, network.fasm) for b in network.branches]
        self.step_index = 0
        self._operating_point()

    def _operating_point(self) -> None:
        """Consistent branch state at ``t = 0``.

        Capacitor voltages and inductor currents are the given initial
        values; everything else follows from the network at ``t = 0``.
        Starting from all-zero currents instead would hand a step source a
        ramp over the first step and cost the trapezoidal rule its second
        order.
        """
        net = self.network
        n = net.node_count
        caps = [k for k, b in enumerate(net.branches) if b.kind is BranchKind.CAPACITOR]
        a = np.zeros((n + 1 + len(caps), n + 1 + len(caps)))
        rhs = np.zeros(n + 1 + len(caps))
        static = {}
        for k, b in enumerate(net.branches):
            f, t = b.from_node, b.to_node
            if b.kind is BranchKind.CAPACITOR:
                continue
            if b.kind is BranchKind.INDUCTOR:
                y, j = 0.0, self.i[k]
            elif b.kind is BranchKind.SWITCH:
                y, j = net.fasm.y_sw, 0.0
            else:
                nq = discretize_branch(b, self.dt, t=0.0)
                y, j = nq.conductance, nq.history_current
            static[k] = (y, j)
            a[f, f] += y
            a[t, t] += y
            a[f, t] -= y
            a[t, f] -= y
            rhs[f] -= j
            rhs[t] += j
        for m, k in enumerate(caps, start=n + 1):
            b = net.branches[k]
            a[b.from_node, m] += 1.0
            a[b.to_node, m] -= 1.0
            a[m, b.from_node] += 1.0
            a[m, b.to_node] -= 1.0
            rhs[m] = self.u[k]
        keep = np.r_[1:a.shape[0]]  # ground row and column out
        x = np.linalg.lstsq(a[np.ix_(keep, keep)], rhs[keep], rcond=None)[0]
        v = x[:n]
        full = np.concatenate([[0.0], v])
        for k, b in enumerate(net.branches):
            self.u[k] = full[b.from_node] - full[b.to_node]
            if k in static:
                y, j = static[k]
                self.i[k] = y * self.u[k] + j
        for m, k in enumerate(caps):
            self.i[k] = x[n + m]
        self.v = v

    @property
    def time(self) -> float:
        return self.step_index * self.dt

    def prepare(self) -> StepResult:
        """Companion sources for the next step, without advancing."""
        t = (self.step_index + 1) * self.dt
        states = self.network.switch_states(t)
        fasm = self.network.fasm
        history = [
            discretize_branch(b, self.dt, self.u[k], self.i[k], t=t,
                              switch_on=states.get(b.id, False), fasm=fasm).history_current
            for k, b in enumerate(self.network.branches)
        ]
        self._history = np.array(history)
        return StepResult(t, self.g, injection_vector(self.network, history), states)

    def commit(self, v: np.ndarray) -> None:
        v = np.asarray(v, dtype=float)
        full = np.concatenate([[0.0], v])
        for k, b in enumerate(self.network.branches):
            self.u[k] = full[b.from_node] - full[b.to_node]
            self.i[k] = self._cond[k] * self.u[k] + self._history[k]
        self.v = v
        self.step_index += 1

    def channels(self) -> dict[str, float]:
        out = {f"v_{name}": self.v[k] for k, name in enumerate(self.network.node_names)}
        out.update({f"i_{b.id}": self.i[k] for k, b in enumerate(self.network.branches)})
        return out

    def run(self, n_steps: int, solve: Callable[[np.ndarray, np.ndarray], np.ndarray] = classical_solve
            ) -> Iterator[tuple[StepResult, np.ndarray]]:
        for _ in range(n_steps):
            step = self.prepare()
            try:
                v = solve(step.g, step.rhs)
            except (SolverError, AssemblyError) as exc:
                raise type(exc)(f"t={step.t:.9g} s: {exc}") from exc
            self.commit(v)
            yield step, v


def step_count(dt: float, t_end: float) -> int:
    if not dt > 0 or not t_end > 0:
        raise InvalidParameterError("dt and t_end must be positive")
    return int(round(t_end / dt))


def run_classical(network: NetworkModel, dt: float | None = None, t_end: float | None = None,
                  initial: Mapping[str, tuple[float, float]] | None = None) -> Waveform:
    """Reference transient run using the direct solver at every step."""
    dt = float(network.settings.get("dt", 0.0)) if dt is None else dt
    t_end = float(network.settings.get("t_end", 0.0)) if t_end is None else t_end
    n_steps = step_count(dt, t_end)
    stepper = TransientStepper(network, dt, initial)
    rows = [stepper.channels()]
    for _ in stepper.run(n_steps):
        rows.append(stepper.channels())
    time = np.arange(n_steps + 1) * dt
    return Waveform(time, {k: np.array([r[k] for r in rows]) for k in rows[0]})


def stored_energy(network: NetworkModel, wave: Waveform) -> np.ndarray:
    """Energy held in inductors and capacitors at each sample."""
    energy = np.zeros_like(wave.time)
    full = [np.zeros_like(wave.time)] + [wave[f"v_{n}"] for n in network.node_names]
    for b in network.branches:
        if b.kind is BranchKind.INDUCTOR:
            energy += 0.5 * b.value * wave[f"i_{b.id}"] ** 2
        elif b.kind is BranchKind.CAPACITOR:
            u = full[b.from_node] - full[b.to_node]
            energy += 0.5 * b.value * u**2
    return energy
