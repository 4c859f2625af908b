"""Transient runs with either the direct solver or the variational solver in the loop."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from ._backend import BACKEND
from .emtp import NetworkModel, TransientStepper, Waveform, classical_solve, step_count
from .errors import ConvergenceError, InvalidParameterError
from .pauli import naive_pauli_decompose
from .vqls import OptimizerConfig, SolverSetup, circuit_accounting, solve_with_compensation

__all__ = ["SimulationSettings", "simulate", "settings_from_network"]


@dataclass
class SimulationSettings:
    dt: float
    t_end: float
    window_start: float = 0.0
    eps: float = 1e-7
    layers: int = 3
    mode: str | int = "exact"
    method: str = "mlqc"
    max_rounds: int = 10
    seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if not self.dt > 0 or not self.t_end > 0:
            raise InvalidParameterError("dt and t_end must be positive")
        if not 0 <= self.window_start < self.t_end:
            raise InvalidParameterError("window_start must lie in [0, t_end)")
        if not self.eps > 0:
            raise InvalidParameterError("eps must be positive")
        if self.layers < 0 or self.max_rounds < 0:
            raise InvalidParameterError("layers and max_rounds must be non-negative")


def settings_from_network(network: NetworkModel, **overrides) -> SimulationSettings:
    s = network.settings
    base = {
        "dt": s.get("dt"), "t_end": s.get("t_end"), "window_start": s.get("window_start", 0.0),
        "eps": s.get("eps", 1e-7), "layers": s.get("layers", 3), "seed": s.get("seed", 0),
        "max_rounds": s.get("max_rounds", 10),
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if base["dt"] is None or base["t_end"] is None:
        raise InvalidParameterError("dt and t_end must be given in the config or on the command line")
    opt = base.pop("optimizer", None)
    if opt is None:
        opt = OptimizerConfig(rng_seed=int(base["seed"]),
                              max_iterations=int(s.get("max_iterations", OptimizerConfig.max_iterations)))
    return SimulationSettings(optimizer=opt, **base)


def simulate(network: NetworkModel, engine: str, settings: SimulationSettings) -> tuple[Waveform, dict]:
    """Run from ``t = 0`` with the direct solver up to ``window_start``, then
    record every step of the window with the selected engine.

    The ``rel_err`` channel is the relative distance between the engine's
    node voltages and a direct solve of the same step system.
    """
    if engine not in ("classical", "qemtp"):
        raise InvalidParameterError(f"unknown engine {engine!r}")
    st = settings
    stepper = TransientStepper(network, st.dt)
    n_total = step_count(st.dt, st.t_end)
    n_warm = int(round(st.window_start / st.dt))
    for _ in stepper.run(n_warm):
        pass
    rows = [stepper.channels()]
    errors = [0.0]
    meta: dict = {
        "engine": engine, "library_version": __version__, "kernel_backend": BACKEND,
        "settings": _settings_dict(st), "network": _network_dict(network),
    }
    setup = None
    if engine == "qemtp":
        started = time.perf_counter()
        setup = SolverSetup(stepper.g, method=st.method)
        mapping_time = time.perf_counter() - started
        raw = naive_pauli_decompose(setup.g_tilde, symmetric_filter=True)
        acc = circuit_accounting(setup.n_qubits, setup.decomposition)
        meta.update({
            "n_qubits": setup.n_qubits, "mapping_seconds": mapping_time,
            "terms_admittance": len(raw), "terms_scaled": len(setup.decomposition),
            "circuits_per_evaluation": acc,
            "circuits_saved_admittance": circuit_accounting(setup.n_qubits, len(raw))["saved"],
        })
    warm = None
    steps = []
    for _ in range(n_total - n_warm):
        step = stepper.prepare()
        v_ref = classical_solve(step.g, step.rhs)
        if engine == "classical":
            v = v_ref
        else:
            try:
                sol = solve_with_compensation(
                    step.g, step.rhs, st.eps, st.optimizer, layers=st.layers, mode=st.mode,
                    max_rounds=st.max_rounds, setup=setup, warm=warm, seed=st.seed,
                )
            except ConvergenceError as exc:
                raise ConvergenceError(f"t={step.t:.9g} s: {exc}", exc.trace) from exc
            warm = sol.round_alphas
            v = sol.v_physical
            steps.append({"t": step.t, "rounds": sol.compensation_rounds, "iterations": sol.iterations,
                          "residual": sol.residual})
        stepper.commit(v)
        norm = np.linalg.norm(v_ref)
        errors.append(float(np.linalg.norm(v - v_ref) / norm) if norm > 0 else float(np.linalg.norm(v)))
        rows.append(stepper.channels())
    time_axis = (n_warm + np.arange(len(rows))) * st.dt
    channels = {k: np.array([r[k] for r in rows]) for k in rows[0]}
    channels["rel_err"] = np.array(errors)
    if steps:
        iters = np.array([s["iterations"] for s in steps])
        rounds = np.array([s["rounds"] for s in steps])
        saved = meta["circuits_per_evaluation"]["saved"]
        meta.update({
            "steps": len(steps), "iterations_total": int(iters.sum()),
            "iterations_mean": float(iters.mean()), "rounds_mean": float(rounds.mean()),
            "rounds_max": int(rounds.max()), "max_residual": float(max(s["residual"] for s in steps)),
            "max_rel_err": float(max(errors)),
            "circuits_saved_total": int(saved * iters.sum()),
            "circuits_saved_per_step_mean": float(saved * iters.mean()),
        })
    return Waveform(time_axis, channels), meta


def _settings_dict(st: SimulationSettings) -> dict:
    d = asdict(st)
    d["optimizer"] = asdict(st.optimizer)
    return d


def _network_dict(network: NetworkModel) -> dict:
    return {
        "nodes": list(network.node_names),
        "branches": [
            {"id": b.id, "kind": b.kind.value, "from": b.from_node, "to": b.to_node, "value": b.value,
             "control": b.control, "complement": b.complement,
             "source": None if b.source is None else asdict(b.source)}
            for b in network.branches
        ],
        "gates": {k: {"scheme": type(v).__name__, **asdict(v)} for k, v in network.gates.items()},
        "fasm": None if network.fasm is None else asdict(network.fasm),
        "settings": dict(network.settings),
    }
