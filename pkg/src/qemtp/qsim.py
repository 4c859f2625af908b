"""Statevector simulation for the variational solver.

Qubit 0 is the most significant bit of the basis index, so the leftmost
letter of a Pauli string acts on qubit 0.  The ansatz and the encoding
circuits use only Ry and CZ, which keeps their amplitudes real; the batched
helpers below exploit that and work on float arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DimensionError, InvalidParameterError
from .pauli import PauliString

__all__ = [
    "StateVector", "AnsatzConfig", "EncodingOperator", "PauliOp", "DenseOp", "ZOp",
    "apply_ry", "apply_cz", "apply_h", "apply_s", "apply_pauli", "apply_pauli_string",
    "ansatz_state", "ansatz_states", "amplitude_encode", "hadamard_test", "delta_term",
    "beta_term", "parameter_count", "z_signs",
]

NORM_TOL = 1e-12


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.size != 1 << self.n_qubits:
            raise DimensionError(f"{self.amplitudes.size} amplitudes for {self.n_qubits} qubits")

    @classmethod
    def zero(cls, n_qubits: int) -> StateVector:
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> StateVector:
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def _check_qubit(state: StateVector, q: int) -> None:
    if not 0 <= q < state.n_qubits:
        raise InvalidParameterError(f"qubit {q} out of range for {state.n_qubits} qubits")


def _apply_1q(state: StateVector, q: int, m: np.ndarray) -> StateVector:
    _check_qubit(state, q)
    n = state.n_qubits
    a = state.amplitudes.reshape(1 << q, 2, 1 << (n - q - 1))
    out = np.einsum("ij,ajb->aib", m, a)
    return StateVector(n, out.reshape(-1))


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]])


_H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
_S = np.array([[1, 0], [0, 1j]])


def apply_ry(state: StateVector, qubit: int, theta: float) -> StateVector:
    return _apply_1q(state, qubit, ry_matrix(theta))


def apply_h(state: StateVector, qubit: int) -> StateVector:
    return _apply_1q(state, qubit, _H)


def apply_s(state: StateVector, qubit: int) -> StateVector:
    return _apply_1q(state, qubit, _S)


def apply_pauli(state: StateVector, letter: str, qubit: int) -> StateVector:
    from .pauli import PAULI_MATRICES

    if letter not in PAULI_MATRICES:
        raise InvalidParameterError(f"unknown Pauli letter {letter!r}")
    return _apply_1q(state, qubit, PAULI_MATRICES[letter])


def apply_pauli_string(state: StateVector, s: PauliString | str) -> StateVector:
    """Letter-by-letter application; no 2^n operator is formed."""
    s = s if isinstance(s, PauliString) else PauliString(s)
    if s.n_qubits != state.n_qubits:
        raise DimensionError(f"{s} does not act on {state.n_qubits} qubits")
    for q, letter in enumerate(str(s)):
        if letter != "I":
            state = apply_pauli(state, letter, q)
    return state


def apply_cz(state: StateVector, q1: int, q2: int) -> StateVector:
    _check_qubit(state, q1)
    _check_qubit(state, q2)
    if q1 == q2:
        raise InvalidParameterError("CZ needs two distinct qubits")
    n = state.n_qubits
    idx = np.arange(1 << n)
    both = ((idx >> (n - 1 - q1)) & 1) & ((idx >> (n - 1 - q2)) & 1)
    return StateVector(n, np.where(both == 1, -state.amplitudes, state.amplitudes))


def parameter_count(n_qubits: int, layers: int) -> int:
    return n_qubits * (layers + 1)


@dataclass
class AnsatzConfig:
    """Initial Ry layer, then per layer one CZ sublayer followed by Ry on
    every qubit.  Layer 1 entangles pairs (0,1),(2,3),..., layer 2 pairs
    (1,2),(3,4),..., and so on alternately.

    Applying both sublayers back to back in every layer looks richer but is
    not: for three or more qubits the reachable states then form a proper
    submanifold of the real unit sphere whatever the depth.
    """

    n_qubits: int
    layers: int
    params: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.n_qubits < 1 or self.layers < 0:
            raise InvalidParameterError("need at least one qubit and a non-negative layer count")
        if self.params is None:
            self.params = np.zeros(self.size)
        self.params = np.asarray(self.params, dtype=float).reshape(-1)
        if self.params.size != self.size:
            raise DimensionError(f"expected {self.size} angles, got {self.params.size}")
        if not np.all(np.isfinite(self.params)):
            raise InvalidParameterError("ansatz angles must be finite")

    @property
    def size(self) -> int:
        return parameter_count(self.n_qubits, self.layers)

    def with_params(self, params) -> AnsatzConfig:
        return AnsatzConfig(self.n_qubits, self.layers, params)


@lru_cache(maxsize=None)
def _ladder_signs(n: int, start: int) -> np.ndarray:
    """Diagonal of CZ on pairs (start, start+1), (start+2, start+3), ..."""
    idx = np.arange(1 << n)
    bits = [(idx >> (n - 1 - q)) & 1 for q in range(n)]
    sign = np.ones(1 << n)
    for q in range(start, n - 1, 2):
        sign[(bits[q] & bits[q + 1]) == 1] *= -1
    sign.flags.writeable = False
    return sign


@lru_cache(maxsize=None)
def z_signs(n: int) -> np.ndarray:
    """Row ``j`` is the diagonal of ``Z_j`` on ``n`` qubits."""
    idx = np.arange(1 << n)
    out = np.array([1.0 - 2.0 * ((idx >> (n - 1 - j)) & 1) for j in range(n)])
    out.flags.writeable = False
    return out


def _ry_batch(x: np.ndarray, n: int, q: int, theta: np.ndarray) -> np.ndarray:
    b = x.shape[0]
    v = x.reshape(b, 1 << q, 2, 1 << (n - q - 1))
    c = np.cos(theta / 2)[:, None, None]
    s = np.sin(theta / 2)[:, None, None]
    a0, a1 = v[:, :, 0, :], v[:, :, 1, :]
    out = np.empty_like(v)
    out[:, :, 0, :] = c * a0 - s * a1
    out[:, :, 1, :] = s * a0 + c * a1
    return out.reshape(b, -1)


def ansatz_states(n_qubits: int, layers: int, params: np.ndarray) -> np.ndarray:
    """Real amplitudes of ``V(alpha)|0>`` for a batch of angle rows."""
    params = np.atleast_2d(np.asarray(params, dtype=float))
    if params.shape[1] != parameter_count(n_qubits, layers):
        raise DimensionError("angle count does not match the ansatz")
    b, n = params.shape[0], n_qubits
    x = np.zeros((b, 1 << n))
    x[:, 0] = 1.0
    for layer in range(layers + 1):
        if layer:
            x = x * _ladder_signs(n, (layer - 1) % 2)
        for q in range(n):
            x = _ry_batch(x, n, q, params[:, layer * n + q])
    return x


def ansatz_state(cfg: AnsatzConfig) -> StateVector:
    return StateVector(cfg.n_qubits, ansatz_states(cfg.n_qubits, cfg.layers, cfg.params)[0])


@dataclass
class EncodingOperator:
    """State preparation ``U|0> = target`` from a binary tree of controlled Ry."""

    target: np.ndarray
    angles: list[np.ndarray]

    @property
    def n_qubits(self) -> int:
        return len(self.angles)

    def apply_batch(self, x: np.ndarray) -> np.ndarray:
        """Apply ``U`` to each row of ``x``."""
        n = self.n_qubits
        x = np.asarray(x, dtype=float)
        b = x.shape[0]
        for k, theta in enumerate(self.angles):
            v = x.reshape(b, 1 << k, 2, 1 << (n - k - 1))
            c = np.cos(theta / 2)[None, :, None]
            s = np.sin(theta / 2)[None, :, None]
            a0, a1 = v[:, :, 0, :], v[:, :, 1, :]
            out = np.empty_like(v)
            out[:, :, 0, :] = c * a0 - s * a1
            out[:, :, 1, :] = s * a0 + c * a1
            x = out.reshape(b, -1)
        return x

    @property
    def matrix(self) -> np.ndarray:
        m = getattr(self, "_matrix", None)
        if m is None:
            dim = 1 << self.n_qubits
            m = self.apply_batch(np.eye(dim)).T
            self._matrix = m
        return m

    def prepare(self) -> StateVector:
        zero = np.zeros((1, 1 << self.n_qubits))
        zero[0, 0] = 1.0
        return StateVector(self.n_qubits, self.apply_batch(zero)[0])


def amplitude_encode(target) -> EncodingOperator:
    b = np.asarray(target, dtype=float).reshape(-1)
    dim = b.size
    n = dim.bit_length() - 1
    if dim < 2 or dim != 1 << n:
        raise DimensionError(f"target length {dim} is not a power of two >= 2")
    if abs(np.linalg.norm(b) - 1.0) > NORM_TOL:
        raise InvalidParameterError("encoding target must have unit norm")
    angles = []
    for k in range(n):
        blocks = b.reshape(1 << k, 2, -1)
        if k == n - 1:
            # signed leaves: atan2 carries the sign of each pair
            angles.append(2 * np.arctan2(blocks[:, 1, 0], blocks[:, 0, 0]))
        else:
            w = np.linalg.norm(blocks, axis=2)
            angles.append(2 * np.arctan2(w[:, 1], w[:, 0]))
    return EncodingOperator(b.copy(), angles)


@dataclass(frozen=True)
class PauliOp:
    string: PauliString


@dataclass(frozen=True)
class DenseOp:
    matrix: np.ndarray
    adjoint: bool = False


@dataclass(frozen=True)
class ZOp:
    qubit: int


Operator = PauliOp | DenseOp | ZOp | PauliString | str


def _as_op(op) -> PauliOp | DenseOp | ZOp:
    if isinstance(op, (PauliOp, DenseOp, ZOp)):
        return op
    if isinstance(op, (PauliString, str)):
        return PauliOp(op if isinstance(op, PauliString) else PauliString(op))
    if isinstance(op, EncodingOperator):
        return DenseOp(op.matrix)
    if isinstance(op, np.ndarray):
        return DenseOp(op)
    raise InvalidParameterError(f"unsupported operator {op!r}")


def _apply_ops(amps: np.ndarray, n: int, ops: Sequence) -> np.ndarray:
    """Apply ``ops`` in sequence (first element acts first) to a raw amplitude vector."""
    state = StateVector(n, amps)
    for op in ops:
        op = _as_op(op)
        if isinstance(op, PauliOp):
            state = apply_pauli_string(state, op.string)
        elif isinstance(op, ZOp):
            state = apply_pauli(state, "Z", op.qubit)
        else:
            m = op.matrix.conj().T if op.adjoint else op.matrix
            if m.shape != (1 << n, 1 << n):
                raise DimensionError("dense operator does not match the register")
            state = StateVector(n, m @ state.amplitudes)
    return state.amplitudes


def _hadamard_circuit(psi: np.ndarray, n: int, ops: Sequence, imaginary: bool) -> float:
    """Ancilla-based evaluation: H, controlled-W, [S^dagger], H, read P(0) - P(1)."""
    full = StateVector(n + 1, np.kron([1.0, 0.0], psi))
    full = apply_h(full, 0)
    rows = full.amplitudes.reshape(2, -1).copy()
    rows[1] = _apply_ops(rows[1], n, ops)  # control on ancilla = 1
    full = StateVector(n + 1, rows.reshape(-1))
    if imaginary:
        full = _apply_1q(full, 0, _S.conj().T)
    full = apply_h(full, 0)
    p = full.probabilities().reshape(2, -1).sum(axis=1)
    return float(p[0] - p[1])


def hadamard_test(ops: Sequence, ansatz: AnsatzConfig | StateVector, mode: str | int = "exact",
                  *, seed: int | None = None, imaginary: bool = False, path: str = "circuit") -> float:
    """Estimate ``Re<psi|W|psi>`` (or ``Im`` with ``imaginary``) for ``W = ops[-1] ... ops[0]``.

    ``mode="exact"`` reads ``P(0) - P(1)`` from the simulated ancilla
    (``path="circuit"``) or from the direct inner product (``path="direct"``).
    An integer mode draws that many Bernoulli shots from a seeded generator.
    """
    state = ansatz_state(ansatz) if isinstance(ansatz, AnsatzConfig) else ansatz
    n, psi = state.n_qubits, state.amplitudes
    if path == "circuit":
        value = _hadamard_circuit(psi, n, ops, imaginary)
    elif path == "direct":
        inner = np.vdot(psi, _apply_ops(psi, n, ops))
        value = float(inner.imag if imaginary else inner.real)
    else:
        raise InvalidParameterError(f"unknown path {path!r}")
    if mode == "exact":
        return value
    shots = int(mode)
    if shots < 1:
        raise InvalidParameterError("shot count must be positive")
    p0 = min(1.0, max(0.0, (1.0 + value) / 2.0))
    k = np.random.default_rng(seed).binomial(shots, p0)
    return 2.0 * k / shots - 1.0


def _as_string(g) -> PauliString:
    return g if isinstance(g, PauliString) else PauliString(g)


def delta_term(ansatz: AnsatzConfig | StateVector, g_i, g_ip, u: EncodingOperator, j: int,
               mode: str | int = "exact", *, seed: int | None = None, path: str = "circuit") -> float:
    """``<0|V^dag g_i'^dag U Z_j U^dag g_i V|0>``; Pauli strings are self-adjoint."""
    ops = [PauliOp(_as_string(g_i)), DenseOp(u.matrix, adjoint=True), ZOp(j), DenseOp(u.matrix),
           PauliOp(_as_string(g_ip))]
    return hadamard_test(ops, ansatz, mode, seed=seed, path=path)


def beta_term(ansatz: AnsatzConfig | StateVector, g_i, g_ip, mode: str | int = "exact",
              *, seed: int | None = None, path: str = "circuit") -> float:
    ops = [PauliOp(_as_string(g_i)), PauliOp(_as_string(g_ip))]
    return hadamard_test(ops, ansatz, mode, seed=seed, path=path)
