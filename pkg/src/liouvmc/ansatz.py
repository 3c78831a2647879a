"""The Liouville Density Machine: an RBM-style complex amplitude over 4-state sites.

The amplitude for a configuration s (entries in {-2,-1,1,2}) is

    rho_alpha(s) = exp( sum_j a1_j s_j + a2_j s_j^2 + a3_j s_j^3 )
                   * prod_i 2 cosh( b_i + sum_j U_ij s_j + V_ij s_j^2 + W_ij s_j^3 )

with complex parameters throughout. The three visible-bias vectors and three
weight matrices couple to the first three powers of s, which is what lets a
single visible unit discriminate the four local states.

All evaluation happens in log space (cosh overflows near |theta| ~ 700) and
all derivatives are holomorphic in the parameters; the conjugations needed
for covariances happen in the estimator layer.

Flattened parameter order, used by the optimizer and the derivative vectors:
[a1, a2, a3, b, U row-major, V row-major, W row-major], total 3N + M + 3NM.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError


@dataclass
class LdmParameters:
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    b: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        for name in ("a1", "a2", "a3", "b", "u", "v", "w"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.complex128))
        n = self.a1.shape[0] if self.a1.ndim == 1 else -1
        m = self.b.shape[0] if self.b.ndim == 1 else -1
        if n < 1 or m < 0:
            raise DomainError("a1 must be a vector of length N >= 1 and b a vector of length M >= 0")
        if self.a2.shape != (n,) or self.a3.shape != (n,):
            raise DomainError("a1, a2, a3 must have equal lengths")
        for name in ("u", "v", "w"):
            if getattr(self, name).shape != (m, n):
                raise DomainError(f"{name} must have shape (M, N) = ({m}, {n})")

    @property
    def n_visible(self) -> int:
        return self.a1.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.b.shape[0]

    @property
    def n_params(self) -> int:
        return parameter_count(self.n_visible, self.n_hidden)


def parameter_count(n: int, m: int) -> int:
    return 3 * n + m + 3 * n * m


def init_params(n: int, m: int, scale: float = 0.01, seed: int = 0) -> LdmParameters:
    """Independent complex Gaussian entries, std `scale` on real and imaginary parts.

    Blocks are drawn in flattening order, so a given seed pins every entry.
    """
    if scale < 0:
        raise DomainError("scale must be >= 0")
    rng = np.random.default_rng(seed)

    def draw(*shape):
        return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

    return LdmParameters(
        a1=draw(n), a2=draw(n), a3=draw(n), b=draw(m),
        u=draw(m, n), v=draw(m, n), w=draw(m, n),
    )


def zero_params(n: int, m: int) -> LdmParameters:
    z = np.zeros
    return LdmParameters(a1=z(n), a2=z(n), a3=z(n), b=z(m), u=z((m, n)), v=z((m, n)), w=z((m, n)))


def flatten_params(params: LdmParameters) -> np.ndarray:
    return np.concatenate([
        params.a1, params.a2, params.a3, params.b,
        params.u.ravel(), params.v.ravel(), params.w.ravel(),
    ])


def unflatten_params(vec: np.ndarray, n: int, m: int) -> LdmParameters:
    vec = np.asarray(vec, dtype=np.complex128)
    if vec.shape != (parameter_count(n, m),):
        raise DomainError(f"expected {parameter_count(n, m)} parameters, got {vec.shape}")
    parts = np.split(vec, np.cumsum([n, n, n, m, m * n, m * n]))
    return LdmParameters(
        a1=parts[0], a2=parts[1], a3=parts[2], b=parts[3],
        u=parts[4].reshape(m, n), v=parts[5].reshape(m, n), w=parts[6].reshape(m, n),
    )


def _log2cosh(theta: np.ndarray) -> np.ndarray:
    # log(2 cosh t) = |t| + log(1 + exp(-2|t|)) with |t| meaning sign(Re t) * t,
    # which keeps the exponent's real part non-positive for any complex t
    sign = np.where(theta.real < 0, -1.0, 1.0)
    t = sign * theta
    return t + np.log1p(np.exp(-2.0 * t))


def _check_batch(params: LdmParameters, configs: np.ndarray) -> np.ndarray:
    configs = np.asarray(configs)
    if configs.ndim == 1:
        configs = configs[None, :]
    if configs.ndim != 2 or configs.shape[1] != params.n_visible:
        raise DomainError(
            f"configurations have {configs.shape[-1]} sites, parameters have {params.n_visible}"
        )
    return configs.astype(np.float64)


def hidden_arguments(params: LdmParameters, configs) -> np.ndarray:
    """theta_i = b_i + sum_j U_ij s_j + V_ij s_j^2 + W_ij s_j^3, per sample; shape (B, M)."""
    s = _check_batch(params, configs)
    s2 = s * s
    s3 = s2 * s
    return params.b[None, :] + s @ params.u.T + s2 @ params.v.T + s3 @ params.w.T


def log_rho_batch(params: LdmParameters, configs) -> np.ndarray:
    s = _check_batch(params, configs)
    s2 = s * s
    s3 = s2 * s
    visible = s @ params.a1 + s2 @ params.a2 + s3 @ params.a3
    theta = params.b[None, :] + s @ params.u.T + s2 @ params.v.T + s3 @ params.w.T
    return visible + _log2cosh(theta).sum(axis=1)


def log_rho(params: LdmParameters, s) -> complex:
    return complex(log_rho_batch(params, np.asarray(s)[None, :])[0])


def amplitude_ratio(params: LdmParameters, s_new, s_old) -> complex:
    """rho(s_new) / rho(s_old), computed as a single exponentiated log difference."""
    logs = log_rho_batch(params, np.stack([np.asarray(s_new), np.asarray(s_old)]))
    return complex(np.exp(logs[0] - logs[1]))


def log_derivatives_batch(params: LdmParameters, configs) -> np.ndarray:
    """Holomorphic d log rho / d alpha per sample, flattened; shape (B, 3N+M+3NM).

    a-blocks: s, s^2, s^3. b: tanh theta. U/V/W rows: tanh(theta_i) * s_j^k.
    """
    s = _check_batch(params, configs)
    s2 = s * s
    s3 = s2 * s
    theta = params.b[None, :] + s @ params.u.T + s2 @ params.v.T + s3 @ params.w.T
    tanh = np.tanh(theta)
    nb = s.shape[0]
    return np.concatenate([
        s.astype(np.complex128), s2.astype(np.complex128), s3.astype(np.complex128),
        tanh,
        (tanh[:, :, None] * s[:, None, :]).reshape(nb, -1),
        (tanh[:, :, None] * s2[:, None, :]).reshape(nb, -1),
        (tanh[:, :, None] * s3[:, None, :]).reshape(nb, -1),
    ], axis=1)


def log_derivatives(params: LdmParameters, s) -> np.ndarray:
    return log_derivatives_batch(params, np.asarray(s)[None, :])[0]


def _complex_to_pairs(arr: np.ndarray):
    stacked = np.stack([arr.real, arr.imag], axis=-1)
    return stacked.tolist()


def _pairs_to_complex(data, shape, key) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.shape != shape + (2,):
        raise ConfigError(f"checkpoint field {key!r} has shape {arr.shape}, expected {shape + (2,)}")
    return arr[..., 0] + 1j * arr[..., 1]


def to_checkpoint_dict(params: LdmParameters) -> dict:
    return {
        "n": params.n_visible,
        "m": params.n_hidden,
        "a1": _complex_to_pairs(params.a1),
        "a2": _complex_to_pairs(params.a2),
        "a3": _complex_to_pairs(params.a3),
        "b": _complex_to_pairs(params.b),
        "u": _complex_to_pairs(params.u),
        "v": _complex_to_pairs(params.v),
        "w": _complex_to_pairs(params.w),
    }


def from_checkpoint_dict(data: dict) -> LdmParameters:
    try:
        n = int(data["n"])
        m = int(data["m"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"checkpoint is missing integer fields 'n'/'m': {exc}") from exc
    if n < 1 or m < 0:
        raise ConfigError(f"checkpoint has invalid sizes n={n}, m={m}")
    missing = [k for k in ("a1", "a2", "a3", "b", "u", "v", "w") if k not in data]
    if missing:
        raise ConfigError(f"checkpoint is missing fields {missing}")
    return LdmParameters(
        a1=_pairs_to_complex(data["a1"], (n,), "a1"),
        a2=_pairs_to_complex(data["a2"], (n,), "a2"),
        a3=_pairs_to_complex(data["a3"], (n,), "a3"),
        b=_pairs_to_complex(data["b"], (m,), "b"),
        u=_pairs_to_complex(data["u"], (m, n), "u"),
        v=_pairs_to_complex(data["v"], (m, n), "v"),
        w=_pairs_to_complex(data["w"], (m, n), "w"),
    )


def save_checkpoint(params: LdmParameters, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_checkpoint_dict(params), fh)
        fh.write("\n")


def load_checkpoint(path) -> LdmParameters:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"checkpoint {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"checkpoint {path} must hold a JSON object")
    return from_checkpoint_dict(data)
