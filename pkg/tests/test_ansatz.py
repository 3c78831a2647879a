"""Amplitude network: evaluation against naive formulas, gradients, serialization."""

import numpy as np
import pytest

from liouvmc import ansatz, models
from liouvmc.errors import ConfigError, DomainError


def random_configs(rng, n_batch, n_sites):
    return rng.choice(models.SITE_VALUES, size=(n_batch, n_sites))


def naive_amplitude(params, s):
    s = np.asarray(s, dtype=float)
    visible = np.sum(params.a1 * s + params.a2 * s**2 + params.a3 * s**3)
    theta = params.b + params.u @ s + params.v @ s**2 + params.w @ s**3
    return np.exp(visible) * np.prod(2.0 * np.cosh(theta))


def test_parameter_count_formula():
    assert ansatz.parameter_count(6, 6) == 132
    assert ansatz.parameter_count(6, 12) == 246
    assert ansatz.parameter_count(16, 22) == 1126
    params = ansatz.init_params(4, 8, seed=0)
    assert params.n_params == 3 * 4 + 8 + 3 * 4 * 8


def test_zero_params_give_uniform_amplitudes():
    params = ansatz.zero_params(3, 5)
    configs = models.all_configurations(3)
    logs = ansatz.log_rho_batch(params, configs)
    assert np.allclose(logs, 5 * np.log(2.0))


def test_visible_only_params_factorize():
    params = ansatz.zero_params(2, 3)
    params.a1 = np.array([0.3 - 0.1j, -0.2 + 0.4j])
    for s in ([2, -1], [1, 1], [-2, 2]):
        expected = np.sum(params.a1 * np.asarray(s)) + 3 * np.log(2.0)
        assert ansatz.log_rho(params, s) == pytest.approx(expected)


def test_log_rho_matches_naive_product():
    rng = np.random.default_rng(21)
    for _ in range(3):
        params = ansatz.init_params(3, 4, scale=0.15, seed=int(rng.integers(1 << 30)))
        configs = random_configs(rng, 20, 3)
        logs = ansatz.log_rho_batch(params, configs)
        for logval, s in zip(logs, configs):
            assert np.exp(logval) == pytest.approx(naive_amplitude(params, s), rel=1e-10)


def test_log_rho_survives_huge_arguments():
    params = ansatz.zero_params(1, 2)
    params.b = np.array([800.0 + 3.0j, -900.0 + 0.5j])
    val = ansatz.log_rho(params, [2])
    assert np.isfinite(val.real) and np.isfinite(val.imag)
    # for |Re theta| >> 1, log 2cosh(theta) -> sign(Re theta) * theta
    assert val == pytest.approx((800.0 + 3.0j) + (900.0 - 0.5j))


def test_gradient_against_finite_differences():
    rng = np.random.default_rng(8)
    eps = 1e-6
    for trial in range(4):
        params = ansatz.init_params(2, 3, scale=0.2, seed=100 + trial)
        vec = ansatz.flatten_params(params)
        s = random_configs(rng, 1, 2)[0]
        grad = ansatz.log_derivatives(params, s)
        assert grad.shape == (params.n_params,)
        for k in rng.choice(params.n_params, size=6, replace=False):
            bumped_p = vec.copy()
            bumped_p[k] += eps
            bumped_m = vec.copy()
            bumped_m[k] -= eps
            fd = (
                ansatz.log_rho(ansatz.unflatten_params(bumped_p, 2, 3), s)
                - ansatz.log_rho(ansatz.unflatten_params(bumped_m, 2, 3), s)
            ) / (2 * eps)
            assert grad[k] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_ratio_reciprocity():
    params = ansatz.init_params(3, 3, scale=0.3, seed=5)
    a = [2, -1, 1]
    b = [-2, -2, 2]
    assert ansatz.amplitude_ratio(params, a, a) == pytest.approx(1.0)
    prod = ansatz.amplitude_ratio(params, a, b) * ansatz.amplitude_ratio(params, b, a)
    assert prod == pytest.approx(1.0, rel=1e-12)


def test_flatten_round_trip_and_length_check():
    params = ansatz.init_params(3, 5, seed=9)
    vec = ansatz.flatten_params(params)
    assert vec.shape == (ansatz.parameter_count(3, 5),)
    back = ansatz.unflatten_params(vec, 3, 5)
    for name in ("a1", "a2", "a3", "b", "u", "v", "w"):
        assert np.array_equal(getattr(back, name), getattr(params, name))
    with pytest.raises(DomainError):
        ansatz.unflatten_params(vec[:-1], 3, 5)


def test_flatten_block_order():
    params = ansatz.zero_params(2, 1)
    params.a2 = np.array([5.0, 6.0])
    params.u = np.array([[7.0, 8.0]])
    vec = ansatz.flatten_params(params)
    assert vec[2] == 5.0 and vec[3] == 6.0  # a2 sits right after a1
    assert vec[7] == 7.0 and vec[8] == 8.0  # u follows b


def test_batch_shape_validation():
    params = ansatz.init_params(3, 2, seed=0)
    with pytest.raises(DomainError):
        ansatz.log_rho_batch(params, [[2, -2]])
    with pytest.raises(DomainError):
        ansatz.log_derivatives_batch(params, np.ones((4, 5)))


def test_parameter_shape_validation():
    with pytest.raises(DomainError):
        ansatz.LdmParameters(
            a1=np.zeros(2), a2=np.zeros(3), a3=np.zeros(2),
            b=np.zeros(1), u=np.zeros((1, 2)), v=np.zeros((1, 2)), w=np.zeros((1, 2)),
        )
    with pytest.raises(DomainError):
        ansatz.init_params(2, 2, scale=-0.1)


def test_init_is_seeded_and_scaled():
    p1 = ansatz.init_params(4, 6, scale=0.05, seed=123)
    p2 = ansatz.init_params(4, 6, scale=0.05, seed=123)
    p3 = ansatz.init_params(4, 6, scale=0.05, seed=124)
    assert np.array_equal(ansatz.flatten_params(p1), ansatz.flatten_params(p2))
    assert not np.array_equal(ansatz.flatten_params(p1), ansatz.flatten_params(p3))
    big = ansatz.flatten_params(ansatz.init_params(20, 30, scale=0.05, seed=1))
    assert abs(np.std(big.real) - 0.05) < 0.01
    zero = ansatz.flatten_params(ansatz.init_params(3, 3, scale=0.0, seed=7))
    assert np.all(zero == 0)


def test_checkpoint_round_trip_is_exact(tmp_path):
    params = ansatz.init_params(3, 7, scale=0.4, seed=42)
    path = tmp_path / "ck.json"
    ansatz.save_checkpoint(params, path)
    loaded = ansatz.load_checkpoint(path)
    assert np.array_equal(ansatz.flatten_params(loaded), ansatz.flatten_params(params))


def test_checkpoint_validation(tmp_path):
    params = ansatz.init_params(2, 2, seed=0)
    data = ansatz.to_checkpoint_dict(params)
    del data["v"]
    with pytest.raises(ConfigError):
        ansatz.from_checkpoint_dict(data)

    data = ansatz.to_checkpoint_dict(params)
    data["u"] = [[[1.0, 2.0]]]  # wrong shape
    with pytest.raises(ConfigError):
        ansatz.from_checkpoint_dict(data)

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        ansatz.load_checkpoint(bad)
