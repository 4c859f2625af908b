"""Variational linear solve with the local cost and residual compensation.

The cost of a candidate ``psi = V(alpha)|0>`` is

    C = 1/2 - (1/2n) * N / D
    N = sum_j <x| U Z_j U^T |x>,   D = <x|x>,   x = G psi

where ``U|0> = b`` encodes the normalised right-hand side.  Expanding ``G``
in Pauli strings turns ``N`` and ``D`` into weighted sums of the Hadamard
test terms ``delta_{i i' j}`` and ``beta_{i i'}``.  For a real symmetric
``G`` every coefficient and every retained string is real and the ansatz is
real, so the imaginary-part circuits are never needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .embed import extend_system, recover_solution
from .errors import ConvergenceError, DegenerateStateError, InvalidParameterError
from .pauli import PauliDecomposition, action, circuits_reduced, mlqc_decompose, naive_pauli_decompose
from .qsim import EncodingOperator, amplitude_encode, ansatz_states, parameter_count, z_signs

__all__ = [
    "OptimizerConfig", "CostEvaluation", "CostContext", "OptimizeResult", "VqlsSolution",
    "local_cost", "gradient", "optimize", "solve_with_compensation", "circuit_accounting",
    "Preconditioner", "SolverSetup",
]

SHIFT = math.pi / 2


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.1
    max_iterations: int = 2000
    cost_tolerance: float = 1e-9
    restarts: int = 3
    rng_seed: int = 0
    stall_window: int = 50
    stall_tolerance: float = 1e-12

    def __post_init__(self):
        if not self.learning_rate >= 0 or not math.isfinite(self.learning_rate):
            raise InvalidParameterError("learning rate must be a finite non-negative number")
        if self.cost_tolerance <= 0 or self.stall_tolerance <= 0:
            raise InvalidParameterError("tolerances must be positive")
        if self.max_iterations < 1 or self.restarts < 0 or self.stall_window < 1:
            raise InvalidParameterError("iteration limits must be positive")


@dataclass(frozen=True)
class CostEvaluation:
    value: float
    numerator: float
    denominator: float
    circuits_evaluated: int
    circuits_saved: int
    std: float = 0.0  # sampling standard deviation of ``value`` in shot mode


class CostContext:
    """Everything the cost needs that does not depend on the angles.

    ``mode`` is ``"exact"`` (contracted quadratic forms), ``"terms"`` (the
    per-term ``delta``/``beta`` tables, exact) or a shot count.
    """

    def __init__(self, decomposition: PauliDecomposition, encoding: EncodingOperator, layers: int,
                 mode: str | int = "exact", *, real_only: bool = True, seed: int | None = None):
        if len(decomposition) == 0:
            raise InvalidParameterError("decomposition has no terms")
        if decomposition.n_qubits != encoding.n_qubits:
            raise InvalidParameterError("decomposition and encoding act on different registers")
        if mode not in ("exact", "terms"):
            if int(mode) < 1:
                raise InvalidParameterError("shot count must be positive")
            mode = int(mode)
        self.decomposition = decomposition
        self.encoding = encoding
        self.n = decomposition.n_qubits
        self.layers = layers
        self.mode = mode
        self.real_only = real_only and decomposition.is_real
        self.rng = np.random.default_rng(seed)
        self.n_terms = len(decomposition)
        g = decomposition.to_matrix()
        if self.real_only:
            g = g.real
        u = encoding.matrix
        zsum = z_signs(self.n).sum(axis=0)
        self._m_num = g.conj().T @ (u * zsum) @ u.T @ g
        self._m_den = g.conj().T @ g
        # per-string row actions for the term tables
        perms, phases = zip(*(action(int(c), self.n) for c in decomposition.codes))
        self._perms = np.array(perms)
        self._phases = np.array(phases)
        self._coeffs = decomposition.coeffs

    @property
    def n_params(self) -> int:
        return parameter_count(self.n, self.layers)

    @property
    def circuits_per_evaluation(self) -> int:
        t = self.n_terms
        return self.n * t * t + t * t

    def _tables(self, psi: np.ndarray):
        phi = self._phases * psi[self._perms]  # row i is g_i psi
        w = phi @ self.encoding.matrix  # row i is U^T g_i psi
        beta = phi.conj() @ phi.T  # beta[i', i]
        z = z_signs(self.n)
        delta = np.einsum("ak,jk,bk->jab", w.conj(), z, w)  # delta[j, i', i]
        return delta, beta

    def _sample(self, table: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p0 = np.clip((1.0 + table) / 2.0, 0.0, 1.0)
        k = self.rng.binomial(self.mode, p0)
        est = 2.0 * k / self.mode - 1.0
        var = (1.0 - np.clip(table, -1.0, 1.0) ** 2) / self.mode
        return est, var

    def num_den(self, psis: np.ndarray):
        """Numerator and denominator for each row of ``psis``; also returns variances."""
        psis = np.atleast_2d(psis)
        if self.mode == "exact":
            num = np.einsum("bk,kl,bl->b", psis, self._m_num.real if self.real_only else self._m_num, psis)
            den = np.einsum("bk,kl,bl->b", psis, self._m_den.real if self.real_only else self._m_den, psis)
            return np.real(num), np.real(den), np.zeros(len(psis)), np.zeros(len(psis))
        c = self._coeffs
        cc = np.outer(c.conj(), c)  # c_{i'}^* c_i
        nums, dens, vn, vd = [], [], [], []
        for psi in psis:
            delta, beta = self._tables(psi)
            if self.real_only:
                delta, beta = delta.real, beta.real
            if self.mode == "terms":
                nums.append(np.real(np.sum(cc * delta)))
                dens.append(np.real(np.sum(cc * beta)))
                vn.append(0.0)
                vd.append(0.0)
                continue
            d_est, d_var = self._sample(delta.real)
            b_est, b_var = self._sample(beta.real)
            cc2 = np.abs(cc) ** 2
            nums.append(float(np.sum(cc.real * d_est)))
            dens.append(float(np.sum(cc.real * b_est)))
            vn.append(float(np.sum(cc2 * d_var)))
            vd.append(float(np.sum(cc2 * b_var)))
        return np.array(nums), np.array(dens), np.array(vn), np.array(vd)

    def evaluate(self, params: np.ndarray) -> CostEvaluation:
        psi = ansatz_states(self.n, self.layers, params)
        num, den, vn, vd = self.num_den(psi)
        num, den = float(num[0]), float(den[0])
        if not den > 0:
            raise DegenerateStateError("cost denominator vanished; re-randomise the ansatz")
        value = 0.5 - num / (2 * self.n * den)
        # delta-method spread of the ratio
        std = math.sqrt(vn[0] + (num / den) ** 2 * vd[0]) / (2 * self.n * den)
        per = self.circuits_per_evaluation
        if self.real_only:
            evaluated, saved = per, per
        else:
            evaluated, saved = 2 * per, 0
        return CostEvaluation(value, num, den, evaluated, saved, std)

    def cost_and_gradient(self, params: np.ndarray) -> tuple[float, np.ndarray]:
        """Cost plus its parameter-shift gradient (quotient rule on N and D)."""
        p = np.asarray(params, dtype=float)
        k = p.size
        batch = np.repeat(p[None, :], 2 * k + 1, axis=0)
        idx = np.arange(k)
        batch[1 + idx, idx] += SHIFT
        batch[1 + k + idx, idx] -= SHIFT
        num, den, _, _ = self.num_den(ansatz_states(self.n, self.layers, batch))
        n0, d0 = num[0], den[0]
        if not d0 > 0:
            raise DegenerateStateError("cost denominator vanished; re-randomise the ansatz")
        dn = (num[1:k + 1] - num[k + 1:]) / 2
        dd = (den[1:k + 1] - den[k + 1:]) / 2
        cost = 0.5 - n0 / (2 * self.n * d0)
        grad = -(dn * d0 - n0 * dd) / (2 * self.n * d0 * d0)
        return float(cost), grad

    def cost(self, params: np.ndarray) -> float:
        psi = ansatz_states(self.n, self.layers, params)
        num, den, _, _ = self.num_den(psi)
        if not den[0] > 0:
            raise DegenerateStateError("cost denominator vanished; re-randomise the ansatz")
        return float(0.5 - num[0] / (2 * self.n * den[0]))


def local_cost(params, decomposition: PauliDecomposition, encoding: EncodingOperator, mode: str | int = "exact",
               *, layers: int | None = None, real_only: bool = True, seed: int | None = None) -> CostEvaluation:
    params = np.asarray(params, dtype=float)
    n = decomposition.n_qubits
    if layers is None:
        layers, rem = divmod(params.size, n)
        layers -= 1
        if rem or layers < 0:
            raise InvalidParameterError("cannot infer the layer count from the angle vector")
    ctx = CostContext(decomposition, encoding, layers, mode, real_only=real_only, seed=seed)
    return ctx.evaluate(params)


def gradient(params, ctx: CostContext) -> np.ndarray:
    return ctx.cost_and_gradient(params)[1]


@dataclass
class OptimizeResult:
    alpha: np.ndarray
    cost: float
    cost_history: list[float]
    converged: bool
    iterations: int
    restarts_used: int


def optimize(ctx: CostContext, cfg: OptimizerConfig, init: np.ndarray | None = None) -> OptimizeResult:
    """Plain gradient descent with step halving on a cost increase and seeded restarts on stall."""
    rng = np.random.default_rng(cfg.rng_seed)
    history: list[float] = []
    best: tuple[float, np.ndarray] | None = None
    total_iters = 0
    start = None if init is None else np.asarray(init, dtype=float).copy()
    for attempt in range(cfg.restarts + 1):
        alpha = start if (attempt == 0 and start is not None) else rng.uniform(0, 2 * np.pi, ctx.n_params)
        eta = cfg.learning_rate
        c, g = ctx.cost_and_gradient(alpha)
        history.append(c)
        window = [c]
        for _ in range(cfg.max_iterations):
            if c <= cfg.cost_tolerance or eta == 0.0:
                break
            trial = alpha - eta * g
            ct = ctx.cost(trial)
            total_iters += 1
            if ct > c:
                eta *= 0.5
                history.append(c)
            else:
                alpha = trial
                c, g = ctx.cost_and_gradient(alpha)
                history.append(c)
            window.append(c)
            if len(window) > cfg.stall_window:
                if window[-cfg.stall_window - 1] - c < cfg.stall_tolerance:
                    break
                window.pop(0)
        if best is None or c < best[0]:
            best = (c, alpha.copy())
        if c <= cfg.cost_tolerance or cfg.learning_rate == 0.0:
            break
    cost, alpha = best
    return OptimizeResult(alpha, cost, history, cost <= cfg.cost_tolerance, total_iters, attempt)


@dataclass
class Preconditioner:
    """Symmetric diagonal scaling ``A = S G S`` with ``S = diag(G)^(-1/2)``."""

    scale: np.ndarray

    @classmethod
    def jacobi(cls, g: np.ndarray) -> Preconditioner:
        d = np.diag(g)
        if np.all(d > 0):
            return cls(1.0 / np.sqrt(d))
        return cls(np.ones(len(d)))

    @classmethod
    def identity(cls, dim: int) -> Preconditioner:
        return cls(np.ones(dim))

    def matrix(self, g: np.ndarray) -> np.ndarray:
        return self.scale[:, None] * g * self.scale[None, :]


@dataclass
class VqlsSolution:
    alpha_opt: np.ndarray
    v_unit: np.ndarray
    v_physical: np.ndarray
    residual: float
    compensation_rounds: int
    cost_history: list[float]
    residual_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    round_alphas: list[np.ndarray] = field(default_factory=list)
    converged: bool = True


class SolverSetup:
    """Matrix-side work shared by every solve against the same ``G``: padding,
    scaling and the one-time Pauli mapping."""

    def __init__(self, g: np.ndarray, *, method: str = "mlqc", precondition: str = "jacobi"):
        ext = extend_system(g, np.zeros(len(g)))
        self.original_dim = ext.original_dim
        self.g_tilde = ext.g_tilde
        if precondition == "jacobi":
            self.pre = Preconditioner.jacobi(self.g_tilde)
        elif precondition == "none":
            self.pre = Preconditioner.identity(len(self.g_tilde))
        else:
            raise InvalidParameterError(f"unknown preconditioner {precondition!r}")
        a = self.pre.matrix(self.g_tilde)
        a = (a + a.T) / 2  # scaling may break bitwise symmetry
        if method == "mlqc":
            self.decomposition = mlqc_decompose(a)
        elif method == "naive":
            self.decomposition = naive_pauli_decompose(a, symmetric_filter=True)
        else:
            raise InvalidParameterError(f"unknown mapping method {method!r}")
        self.n_qubits = self.decomposition.n_qubits


def _vqls_direction(setup: SolverSetup, rhs: np.ndarray, layers: int, cfg: OptimizerConfig,
                    mode: str | int, init, seed) -> tuple[np.ndarray, OptimizeResult]:
    b = setup.pre.scale * rhs
    b = b / np.linalg.norm(b)
    ctx = CostContext(setup.decomposition, amplitude_encode(b), layers, mode, seed=seed)
    res = optimize(ctx, cfg, init)
    psi = ansatz_states(setup.n_qubits, layers, res.alpha)[0]
    x = setup.pre.scale * psi
    return x / np.linalg.norm(x), res


def solve_with_compensation(g, i, eps: float, cfg: OptimizerConfig | None = None, *, layers: int = 3,
                            mode: str | int = "exact", max_rounds: int = 10, setup: SolverSetup | None = None,
                            warm: list[np.ndarray] | None = None, seed: int | None = None,
                            raise_on_failure: bool = True) -> VqlsSolution:
    """Solve ``G v = i`` to an absolute residual ``eps`` (amperes).

    Round 0 solves the system itself; every further round solves for the
    current residual and adds the rescaled correction.  ``warm`` supplies
    starting angles per round (e.g. from the previous time step).
    """
    if not eps > 0:
        raise InvalidParameterError("eps must be positive")
    cfg = cfg or OptimizerConfig()
    g = np.asarray(g, dtype=float)
    i = np.asarray(i, dtype=float).reshape(-1)
    setup = setup or SolverSetup(g)
    n_nodes = setup.original_dim
    dim = len(setup.g_tilde)
    i_hat = np.zeros(dim)
    i_hat[:n_nodes] = i
    if not np.any(i_hat):
        zero = np.zeros(dim)
        return VqlsSolution(np.zeros(0), zero, zero[:n_nodes], 0.0, 0, [], [0.0])
    g_tilde = setup.g_tilde
    v = np.zeros(dim)
    residual = i_hat.copy()
    trace = [float(np.linalg.norm(residual))]
    history: list[float] = []
    alphas: list[np.ndarray] = []
    v_unit = None
    iterations = 0
    for k in range(max_rounds + 1):
        init = warm[k] if warm is not None and k < len(warm) else None
        direction, res = _vqls_direction(setup, residual, layers, cfg, mode, init, seed)
        history.extend(res.cost_history)
        iterations += res.iterations
        alphas.append(res.alpha)
        if k == 0:
            v_unit = direction
        try:
            dv = recover_solution(direction, g_tilde, residual)
        except DegenerateStateError:
            dv = np.zeros(dim)
        v = v + dv
        residual = i_hat - g_tilde @ v
        trace.append(float(np.linalg.norm(residual)))
        if trace[-1] <= eps:
            return VqlsSolution(alphas[0], v_unit, v[:n_nodes], trace[-1], k, history, trace, iterations, alphas)
    if raise_on_failure:
        raise ConvergenceError(f"residual {trace[-1]:.3e} above {eps:g} after {max_rounds} compensation rounds",
                               trace)
    return VqlsSolution(alphas[0], v_unit, v[:n_nodes], trace[-1], max_rounds, history, trace, iterations,
                        alphas, converged=False)


def circuit_accounting(n: int, decomposition: PauliDecomposition | int) -> dict[str, int]:
    """Hadamard-test counts per cost evaluation.

    ``full_count`` counts real and imaginary circuits for every delta and
    beta term; ``saved`` is the reduction ``n * N^2`` against a full-basis
    evaluation; ``traditional_count`` is ``2n * 4^(2n)``.
    """
    t = decomposition if isinstance(decomposition, int) else len(decomposition)
    if t < 0 or n < 1:
        raise InvalidParameterError("need n >= 1 and a non-negative term count")
    per = n * t * t + t * t
    return {
        "n_terms": t,
        "full_count": 2 * per,
        "real_only_count": per,
        "saved": circuits_reduced(n, t),
        "traditional_count": 2 * n * 4 ** (2 * n),
    }
