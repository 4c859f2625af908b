"""Padding of an N-node system onto a qubit register and scale recovery."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateStateError, DimensionError, InvalidParameterError

__all__ = ["ExtendedSystem", "qubits_needed", "extend_system", "normalize", "recover_solution"]


@dataclass(frozen=True)
class ExtendedSystem:
    g_tilde: np.ndarray
    i_hat: np.ndarray
    i_norm: float
    original_dim: int
    n_qubits: int

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @property
    def i_unit(self) -> np.ndarray:
        return self.i_hat / self.i_norm

    def truncate(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v)[: self.original_dim]


def qubits_needed(n: int) -> int:
    """Smallest register holding ``n`` amplitudes; a single node still gets one qubit."""
    if n < 1:
        raise InvalidParameterError("system dimension must be at least 1")
    return max(1, math.ceil(math.log2(n)))


def extend_system(g, i) -> ExtendedSystem:
    g = np.asarray(g, dtype=float)
    i = np.asarray(i, dtype=float).reshape(-1)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {g.shape}")
    n_nodes = g.shape[0]
    if i.shape[0] != n_nodes:
        raise DimensionError(f"injection vector has length {i.shape[0]}, expected {n_nodes}")
    n = qubits_needed(n_nodes)
    dim = 1 << n
    g_tilde = np.eye(dim)
    g_tilde[:n_nodes, :n_nodes] = g
    i_hat = np.zeros(dim)
    i_hat[:n_nodes] = i
    return ExtendedSystem(g_tilde, i_hat, float(np.linalg.norm(i_hat)), n_nodes, n)


def normalize(i_hat) -> tuple[np.ndarray, float]:
    i_hat = np.asarray(i_hat, dtype=float)
    norm = float(np.linalg.norm(i_hat))
    if norm == 0.0:
        raise InvalidParameterError("cannot normalize the zero vector")
    return i_hat / norm, norm


def recover_solution(v_unit, g_tilde, i_hat, original_dim: int | None = None) -> np.ndarray:
    """Rescale a unit state to the least-squares optimal multiple of itself.

    The scalar ``s = <G v, i> / |G v|^2`` also fixes the global sign.
    """
    v_unit = np.asarray(v_unit)
    if np.iscomplexobj(v_unit):
        v_unit = np.real(v_unit)
    gv = np.asarray(g_tilde) @ v_unit
    denom = float(gv @ gv)
    if denom == 0.0:
        raise DegenerateStateError("G v vanishes; the state carries no solution direction")
    s = float(gv @ np.asarray(i_hat)) / denom
    v = s * v_unit
    return v if original_dim is None else v[:original_dim]
