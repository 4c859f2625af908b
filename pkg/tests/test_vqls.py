import numpy as np
import pytest

from qemtp.embed import recover_solution
from qemtp.emtp import classical_solve
from qemtp.errors import ConvergenceError, InvalidParameterError
from qemtp.netconfig import load_network
from qemtp.emtp import TransientStepper
from qemtp.pauli import PauliDecomposition, PauliString, naive_pauli_decompose
from qemtp.qsim import amplitude_encode, ansatz_states, parameter_count
from qemtp.vqls import (
    CostContext, OptimizerConfig, SolverSetup, circuit_accounting, gradient, local_cost, optimize,
    solve_with_compensation,
)

from conftest import random_spd


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def dense_cost(g, b, psi):
    """Local cost straight from matrices: 1/2 - (1/2n) sum_j <Gx|U Z_j U^T|Gx> / <Gx|Gx>."""
    n = int(np.log2(len(b)))
    u = amplitude_encode(b).matrix
    gx = g @ psi
    total = 0.0
    for j in range(n):
        zj = PauliString("".join("Z" if q == j else "I" for q in range(n))).matrix().real
        total += gx @ u @ zj @ u.T @ gx
    return 0.5 - total / (2 * n * (gx @ gx))


def identity_decomposition(n):
    return PauliDecomposition.from_items(n, [("I" * n, 1.0)])


def test_cost_zero_when_state_matches():
    n, layers = 2, 1
    # Ry(pi) on qubit 1 maps |00> to |01>
    alpha = np.zeros(parameter_count(n, layers))
    alpha[1] = np.pi
    ev = local_cost(alpha, identity_decomposition(n), amplitude_encode([0.0, 1.0, 0.0, 0.0]), layers=layers)
    assert abs(ev.value) <= 1e-10
    assert ev.denominator == pytest.approx(1.0)


def test_cost_half_when_image_is_orthogonal():
    g = np.diag([1.0, 2.0, 2.0, 3.0])
    b = np.array([1.0, 0.0, 0.0, 0.0])
    psi = unit([0.0, 1.0, 1.0, 0.0])
    assert (g @ psi) @ b == 0.0
    ctx = CostContext(naive_pauli_decompose(g), amplitude_encode(b), layers=1)
    num, den, _, _ = ctx.num_den(psi[None, :])
    value = 0.5 - num[0] / (2 * 2 * den[0])
    assert value == pytest.approx(0.5, abs=1e-12)
    assert value == pytest.approx(dense_cost(g, b, psi), abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_cost_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    n, layers = 2, 2
    g = random_spd(4, rng, 20.0)
    b = unit(rng.standard_normal(4))
    alpha = rng.uniform(0, 2 * np.pi, parameter_count(n, layers))
    psi = ansatz_states(n, layers, alpha)[0]
    dec = naive_pauli_decompose(g)
    for mode in ("exact", "terms"):
        ev = local_cost(alpha, dec, amplitude_encode(b), mode, layers=layers)
        assert ev.value == pytest.approx(dense_cost(g, b, psi), abs=1e-10)


def test_cost_range_and_real_only_soundness():
    # the local cost lives in [0, 1]; states near U|1..1> approach 1
    rng = np.random.default_rng(7)
    values = []
    for _ in range(50):
        n = int(rng.integers(1, 4))
        layers = 2
        g = random_spd(1 << n, rng, 10.0)
        dec = naive_pauli_decompose(g)
        u = amplitude_encode(unit(rng.standard_normal(1 << n)))
        alpha = rng.uniform(0, 2 * np.pi, parameter_count(n, layers))
        fast = local_cost(alpha, dec, u, "terms", layers=layers, real_only=True)
        full = local_cost(alpha, dec, u, "terms", layers=layers, real_only=False)
        assert abs(fast.value - full.value) <= 1e-10
        assert fast.circuits_saved == fast.circuits_evaluated
        assert full.circuits_saved == 0 and full.circuits_evaluated == 2 * fast.circuits_evaluated
        values.append(fast.value)
    assert -1e-10 <= min(values) and max(values) <= 1 + 1e-10
    assert max(values) > 0.5


def test_gradient_zero_at_optimum():
    ctx = CostContext(identity_decomposition(2), amplitude_encode([1.0, 0, 0, 0]), layers=2)
    np.testing.assert_allclose(gradient(np.zeros(ctx.n_params), ctx), 0.0, atol=1e-14)


def test_gradient_matches_finite_differences():
    h = 1e-5
    for draw in range(20):
        rng = np.random.default_rng(100 + draw)
        n = 2 if draw % 2 else 3
        layers = 2
        g = random_spd(1 << n, rng, 30.0)
        ctx = CostContext(naive_pauli_decompose(g), amplitude_encode(unit(rng.standard_normal(1 << n))), layers)
        alpha = rng.uniform(0, 2 * np.pi, ctx.n_params)
        grad = gradient(alpha, ctx)
        fd = np.empty_like(alpha)
        for k in range(alpha.size):
            e = np.zeros_like(alpha)
            e[k] = h
            fd[k] = (ctx.cost(alpha + e) - ctx.cost(alpha - e)) / (2 * h)
        assert np.max(np.abs(grad - fd)) <= 1e-6


@pytest.mark.parametrize("theta", [0.3, 1.1, 2.5, 4.0])
def test_gradient_single_qubit_closed_form(theta):
    # G = diag(a, b), b = |0>, x = (cos t/2, sin t/2): C = q/(p+q),
    # p = a^2 cos^2, q = b^2 sin^2, dC/dt = a^2 b^2 cos sin / (p+q)^2
    a, bb = 2.0, 0.5
    dec = PauliDecomposition.from_items(1, [("I", (a + bb) / 2), ("Z", (a - bb) / 2)])
    ctx = CostContext(dec, amplitude_encode([1.0, 0.0]), layers=0)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    p, q = a * a * c * c, bb * bb * s * s
    assert ctx.cost(np.array([theta])) == pytest.approx(q / (p + q), abs=1e-14)
    expected = a * a * bb * bb * c * s / (p + q) ** 2
    assert gradient(np.array([theta]), ctx)[0] == pytest.approx(expected, abs=1e-12)


def test_optimize_identity_default_rate():
    rng = np.random.default_rng(0)
    ctx = CostContext(identity_decomposition(2), amplitude_encode(unit(rng.standard_normal(4))), layers=3)
    res = optimize(ctx, OptimizerConfig(cost_tolerance=1e-8, max_iterations=200, restarts=0))
    assert res.converged and res.cost <= 1e-8


def test_optimize_identity_any_target():
    # iteration count scales like 1/eta here; at the default 0.1 some targets need ~550
    for seed in range(20):
        rng = np.random.default_rng(seed)
        ctx = CostContext(identity_decomposition(2), amplitude_encode(unit(rng.standard_normal(4))), layers=3)
        cfg = OptimizerConfig(learning_rate=0.4, cost_tolerance=1e-8, max_iterations=200, restarts=0, rng_seed=seed)
        res = optimize(ctx, cfg)
        assert res.converged and res.cost <= 1e-8, seed


def test_optimize_random_spd_fidelity():
    rng = np.random.default_rng(11)
    g = random_spd(4, rng, 10.0)
    i = rng.standard_normal(4)
    ctx = CostContext(naive_pauli_decompose(g), amplitude_encode(unit(i)), layers=3)
    res = optimize(ctx, OptimizerConfig(rng_seed=2))
    psi = ansatz_states(2, 3, res.alpha)[0]
    assert abs(psi @ unit(classical_solve(g, i))) >= 0.999
    assert res.cost_history[-1] <= res.cost_history[0]


def test_optimize_zero_learning_rate():
    ctx = CostContext(identity_decomposition(2), amplitude_encode(unit([1.0, 2.0, 3.0, 4.0])), layers=1)
    start = np.full(ctx.n_params, 0.4)
    res = optimize(ctx, OptimizerConfig(learning_rate=0.0), init=start)
    np.testing.assert_array_equal(res.alpha, start)
    assert not res.converged


def test_optimizer_config_checks():
    with pytest.raises(InvalidParameterError):
        OptimizerConfig(learning_rate=-0.1)
    with pytest.raises(InvalidParameterError):
        OptimizerConfig(cost_tolerance=0.0)
    with pytest.raises(InvalidParameterError):
        OptimizerConfig(max_iterations=0)


def test_zero_cost_implies_solution():
    rng = np.random.default_rng(5)
    g = random_spd(4, rng, 5.0)
    i = rng.standard_normal(4)
    ctx = CostContext(naive_pauli_decompose(g), amplitude_encode(unit(i)), layers=3)
    res = optimize(ctx, OptimizerConfig(cost_tolerance=1e-10, max_iterations=5000, rng_seed=1))
    assert res.cost <= 1e-10
    v = recover_solution(ansatz_states(2, 3, res.alpha)[0], g, i)
    assert np.linalg.norm(g @ v - i) / np.linalg.norm(i) <= 1e-4


def test_solve_identity():
    sol = solve_with_compensation(np.eye(4), [1.0, 0.0, 0.0, 0.0], 1e-7)
    np.testing.assert_allclose(sol.v_physical, [1.0, 0.0, 0.0, 0.0], atol=1e-7)
    assert sol.compensation_rounds <= 1


def test_solve_random_eight_dim():
    rng = np.random.default_rng(21)
    g = random_spd(8, rng, 10.0)
    i = rng.standard_normal(8)
    sol = solve_with_compensation(g, i, 1e-4, layers=5, seed=0)
    assert np.linalg.norm(g @ sol.v_physical - i) <= 1e-4
    trace = sol.residual_trace
    assert all(b <= a * (1 + 1e-12) for a, b in zip(trace, trace[1:]))


def test_solve_odd_size_and_zero_rhs():
    rng = np.random.default_rng(3)
    g = random_spd(3, rng, 5.0)
    i = rng.standard_normal(3)
    sol = solve_with_compensation(g, i, 1e-7)
    assert sol.v_physical.shape == (3,)
    assert np.linalg.norm(g @ sol.v_physical - i) <= 1e-7
    zero = solve_with_compensation(g, np.zeros(3), 1e-7)
    np.testing.assert_array_equal(zero.v_physical, 0.0)


def test_solve_buck_step_rounds():
    stepper = TransientStepper(load_network("buck.cfg"), 25e-6)
    step = stepper.prepare()
    sol = solve_with_compensation(step.g, step.rhs, 1e-7, seed=0)
    assert sol.compensation_rounds <= 4
    assert np.linalg.norm(step.g @ sol.v_physical - step.rhs) <= 1e-7


def test_convergence_error_carries_trace():
    rng = np.random.default_rng(4)
    g = random_spd(4, rng, 10.0)
    cfg = OptimizerConfig(max_iterations=1, restarts=0)
    with pytest.raises(ConvergenceError) as info:
        solve_with_compensation(g, rng.standard_normal(4), 1e-12, cfg, max_rounds=1)
    assert len(info.value.trace) == 3
    with pytest.raises(InvalidParameterError):
        solve_with_compensation(g, np.ones(4), 0.0)


def test_circuit_accounting_figures():
    assert circuit_accounting(2, 8)["saved"] == 128
    assert circuit_accounting(3, 30)["saved"] == 2700
    acc = circuit_accounting(2, 8)
    assert acc["real_only_count"] == 2 * 64 + 64
    assert acc["full_count"] == 2 * acc["real_only_count"]
    assert acc["traditional_count"] == 2 * 2 * 4 ** 4


def test_setup_counts_terms_of_bundled_matrices():
    buck = SolverSetup(TransientStepper(load_network("buck.cfg"), 25e-6).g)
    raw = naive_pauli_decompose(buck.g_tilde, symmetric_filter=True)
    assert len(raw) == 8
    assert circuit_accounting(buck.n_qubits, raw)["saved"] == 128
