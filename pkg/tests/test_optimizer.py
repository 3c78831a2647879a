"""Update rule algebra, descent behavior, convergence to the exact steady state."""

import numpy as np
import pytest

from liouvmc import ansatz, estimators, models, optimizer, oracle, sampler
from liouvmc.errors import DomainError, SampleUnderflowError, SolverFailureError


def test_sr_config_validation():
    with pytest.raises(DomainError):
        optimizer.SrConfig(eta=0.0)
    with pytest.raises(DomainError):
        optimizer.SrConfig(eta=0.01, lam=-1e-3)
    with pytest.raises(DomainError):
        optimizer.SrConfig(eta=0.01, max_steps=-1)


def test_sr_update_scalar_case():
    system = estimators.SrSystem(fisher=np.eye(1, dtype=complex), forces=np.array([0.1 + 0j]))
    gamma = optimizer.sr_update(system, optimizer.SrConfig(eta=0.01, lam=0.0))
    assert gamma[0] == pytest.approx(0.001)
    # the step moves along +f: it must track the flow toward the steady
    # state, not away from it
    assert gamma[0].real > 0
    gamma = optimizer.sr_update(system, optimizer.SrConfig(eta=0.01, lam=1.0))
    assert gamma[0] == pytest.approx(0.0005)


def test_zero_forces_give_zero_update():
    system = estimators.SrSystem(fisher=np.eye(3, dtype=complex), forces=np.zeros(3, dtype=complex))
    cfg = optimizer.SrConfig(eta=0.05)
    assert np.all(optimizer.sr_update(system, cfg) == 0)
    assert np.all(optimizer.sga_update(system, cfg) == 0)


def test_sr_update_matches_reference_solve():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    fisher = a.conj().T @ a
    forces = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    cfg = optimizer.SrConfig(eta=0.02, lam=1e-3)
    gamma = optimizer.sr_update(estimators.SrSystem(fisher=fisher, forces=forces), cfg)
    lhs = fisher + cfg.lam * np.eye(5)
    expected = np.linalg.lstsq(lhs, cfg.eta * forces, rcond=None)[0]
    assert np.allclose(gamma, expected, atol=1e-10)
    assert np.linalg.norm(lhs @ gamma - cfg.eta * forces) <= 1e-8 * (np.linalg.norm(forces) + 1)


def test_sga_is_plain_scaled_forces():
    forces = np.array([0.2 - 0.1j, 0.05j])
    system = estimators.SrSystem(fisher=np.zeros((2, 2), dtype=complex), forces=forces)
    assert np.array_equal(optimizer.sga_update(system, optimizer.SrConfig(eta=0.1)), 0.1 * forces)


def test_singular_system_without_damping_fails():
    system = estimators.SrSystem(
        fisher=np.zeros((2, 2), dtype=complex), forces=np.array([1.0 + 0j, 0j])
    )
    with pytest.raises(SolverFailureError):
        optimizer.sr_update(system, optimizer.SrConfig(eta=0.01, lam=0.0))


def test_shape_mismatch_raises():
    system = estimators.SrSystem(fisher=np.eye(3, dtype=complex), forces=np.zeros(2, dtype=complex))
    with pytest.raises(DomainError):
        optimizer.sr_update(system, optimizer.SrConfig(eta=0.01))


def test_run_optimization_input_validation():
    model = models.ModelSpec("zz", 2)
    params = ansatz.zero_params(2, 2)
    with pytest.raises(DomainError):
        optimizer.run_optimization(model, params, None, optimizer.SrConfig(eta=0.01), method="adam")
    with pytest.raises(DomainError):
        optimizer.run_optimization(models.ModelSpec("zz", 3), params, None, optimizer.SrConfig(eta=0.01))


def test_zero_steps_returns_input_unchanged():
    model = models.ModelSpec("zz", 2)
    params = ansatz.init_params(2, 2, seed=1)
    out, trace = optimizer.run_optimization(model, params, None, optimizer.SrConfig(eta=0.01, max_steps=0))
    assert len(trace) == 0
    assert np.array_equal(ansatz.flatten_params(out), ansatz.flatten_params(params))


def test_exact_descent_is_monotone_early():
    # deterministic full-enumeration steps at a small learning rate: |C|^2
    # must fall on every one of the first 100 steps
    model = models.ModelSpec("zz", 1, field=1.0)
    for seed in (0, 1, 2):
        p0 = ansatz.init_params(1, 2, scale=0.1, seed=seed)
        _, trace = optimizer.run_optimization(
            model, p0, None,
            optimizer.SrConfig(eta=5e-3, lam=1e-3, max_steps=100, stop_cost=0.0, stop_var=0.0),
        )
        assert len(trace) == 100
        assert np.all(np.diff(trace.cost_abs_sq) < 0)


def test_exact_training_reaches_steady_state_not_trace_state():
    model = models.ModelSpec("zz", 2, field=1.0)
    p0 = ansatz.init_params(2, 4, scale=0.1, seed=3)
    pf, trace = optimizer.run_optimization(
        model, p0, None,
        optimizer.SrConfig(eta=0.02, lam=1e-3, max_steps=400, stop_cost=0.0, stop_var=0.0),
    )
    assert trace.cost_abs_sq[-1] < 1e-5
    # near the minimum the natural-gradient step stalls out
    assert trace.update_norm[-1] < 1e-3
    rec = oracle.reconstruct_density(pf)
    steady = oracle.steady_state_ed(model)
    identity = oracle.DenseState(rho=np.eye(4, dtype=complex) / 4.0)
    assert oracle.fidelity(rec, steady) > 0.99
    # the trace state also zeroes the cost but SR must not land there
    assert oracle.fidelity(rec, identity) < 0.8


def test_early_stop_on_thresholds():
    model = models.ModelSpec("zz", 1, field=1.0)
    p0 = ansatz.init_params(1, 2, scale=0.05, seed=4)
    _, trace = optimizer.run_optimization(
        model, p0, None,
        optimizer.SrConfig(eta=0.02, lam=1e-3, max_steps=5000, stop_cost=1e-8, stop_var=1e-4),
    )
    assert len(trace) < 5000
    assert trace.cost_abs_sq[-1] < 1e-8
    assert trace.update_norm[-1] == 0.0  # stop is recorded without a step


def test_sampled_run_is_deterministic():
    model = models.ModelSpec("zz", 2, field=1.0)
    p0 = ansatz.init_params(2, 4, scale=0.05, seed=6)
    cc = sampler.ChainConfig(n_samples=60, n_chains=2, seed=9)
    cfg = optimizer.SrConfig(eta=0.01, lam=0.01, max_steps=25, stop_cost=0.0, stop_var=0.0)
    pa, ta = optimizer.run_optimization(model, p0, cc, cfg)
    pb, tb = optimizer.run_optimization(model, p0, cc, cfg)
    assert np.array_equal(ansatz.flatten_params(pa), ansatz.flatten_params(pb))
    assert ta.cost_abs_sq == tb.cost_abs_sq
    assert ta.update_norm == tb.update_norm
    assert ta.acceptance == tb.acceptance


def test_on_step_sees_every_estimate():
    model = models.ModelSpec("zz", 1, field=1.0)
    p0 = ansatz.init_params(1, 1, scale=0.05, seed=0)
    seen = []
    optimizer.run_optimization(
        model, p0, None, optimizer.SrConfig(eta=0.01, max_steps=7, stop_cost=0.0, stop_var=0.0),
        on_step=lambda step, params, cost: seen.append((step, cost.abs_sq)),
    )
    assert [s for s, _ in seen] == list(range(7))
    assert all(np.isfinite(c) for _, c in seen)


def test_underflow_abort():
    # a pathological amplitude profile whose transit states reference
    # far larger neighbors: the run must refuse to average over them
    model = models.ModelSpec("zz", 1, field=1.0)
    params = ansatz.zero_params(1, 1)
    params.a1 = np.array([300.0 + 0j])
    cc = sampler.ChainConfig(n_samples=10, n_chains=4, burn_in=0, thinning=1, seed=2)
    with pytest.raises(SampleUnderflowError):
        optimizer.run_optimization(model, params, cc, optimizer.SrConfig(eta=0.01, max_steps=3))


def test_trace_csv_round_trip(tmp_path):
    trace = optimizer.OptimizationTrace()

    class Cost:
        abs_sq = 0.123456789012345678
        variance = 2.5e-17

    trace.append(0, Cost, 1e-300, 0.5, 0.01)
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "step,cost_abs_sq,cost_variance,update_norm,acceptance"
    parts = lines[1].split(",")
    assert int(parts[0]) == 0
    assert float(parts[1]) == Cost.abs_sq  # repr round-trips exactly
    assert float(parts[2]) == Cost.variance
    assert float(parts[3]) == 1e-300
    assert "wall" not in lines[0]
