"""Metropolis sampling of configurations weighted by the ansatz.

Two chain flavors:

* the full chain samples p(s) proportional to |rho_alpha(s)|^2 over all
  4^N configurations (used for the cost, Fisher matrix and forces);
* the diagonal chain is restricted to configurations with entries in
  {-2, 2} and samples proportional to |rho_alpha(d)| to the first power,
  since the observable estimator divides by rho(d) once. Phases are
  handled downstream by the estimators.

Proposals are symmetric single-site moves: pick a site uniformly, replace
its value by one of the other three values uniformly (the diagonal chain
just flips -2 <-> 2). Chains run in lockstep as a vectorized batch; each
chain owns the RNG stream default_rng([seed, stream, chain]) and draws, in
order: the initial configuration (skipped when a start state is supplied),
all proposal sites, all alternative-value picks (full chain only), then all
acceptance uniforms. That fixed order is what makes runs reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ansatz import LdmParameters, _log2cosh, amplitude_ratio
from .errors import DegenerateVarianceError, DomainError
from .models import ModelSpec, validate_configuration

_SITE_VALUES = np.array([-2, -1, 1, 2], dtype=np.int8)
# value+2 -> position in _SITE_VALUES (slots 2 unused)
_VAL_IDX = np.zeros(5, dtype=np.int64)
_VAL_IDX[[0, 1, 3, 4]] = [0, 1, 2, 3]


@dataclass
class ChainConfig:
    """Sampling plan: burn_in and thinning count single-site moves.

    Leaving burn_in or thinning unset picks size-scaled defaults at run
    time: burn_in = 10 N^2 (ten sweeps of N moves) and thinning = N, so the
    decorrelation interval grows with the system. Each chain performs
    burn_in + n_samples * thinning moves in total.
    """

    n_samples: int
    n_chains: int = 4
    burn_in: int | None = None
    thinning: int | None = None
    seed: int = 0
    warm_start: bool = True

    def __post_init__(self):
        if self.n_samples < 0:
            raise DomainError("n_samples must be >= 0")
        if self.n_chains < 1:
            raise DomainError("n_chains must be >= 1")
        if self.burn_in is not None and self.burn_in < 0:
            raise DomainError("burn_in must be >= 0")
        if self.thinning is not None and self.thinning < 1:
            raise DomainError("thinning must be >= 1")

    def resolved_burn_in(self, n_sites: int) -> int:
        return 10 * n_sites * n_sites if self.burn_in is None else self.burn_in

    def resolved_thinning(self, n_sites: int) -> int:
        return n_sites if self.thinning is None else self.thinning


@dataclass
class SampleBatch:
    """Kept samples of all chains, concatenated in chain order."""

    configs: np.ndarray  # (n_chains * n_samples, N) int8
    log_amps: np.ndarray  # cached log rho per sample
    chain_ids: np.ndarray
    acceptance_per_chain: np.ndarray  # accepted fraction over all moves
    final_configs: np.ndarray  # (n_chains, N), for warm-starting the next run

    @property
    def acceptance(self) -> float:
        return float(self.acceptance_per_chain.mean())

    @property
    def n_samples(self) -> int:
        return self.configs.shape[0]

    def per_chain(self, values: np.ndarray) -> np.ndarray:
        """Reshape a per-sample vector to (n_chains, samples per chain)."""
        n_chains = self.final_configs.shape[0]
        return np.asarray(values).reshape(n_chains, -1)


def propose_move(s, rng) -> np.ndarray:
    """Symmetric proposal: one uniform site gets one of its 3 other values."""
    s = validate_configuration(s).copy()
    site = int(rng.integers(s.size))
    alt = int(rng.integers(3))
    idx = _VAL_IDX[s[site] + 2]
    s[site] = _SITE_VALUES[(idx + 1 + alt) % 4]
    return s


def metropolis_step(params: LdmParameters, s, rng) -> np.ndarray:
    """One accept/reject move on the |rho|^2 chain; returns the next state."""
    s = validate_configuration(s)
    proposal = propose_move(s, rng)
    ratio = amplitude_ratio(params, proposal, s)
    if rng.random() < min(1.0, abs(ratio) ** 2):
        return proposal
    return s.copy()


def _initial_state(rng, n: int, diagonal: bool) -> np.ndarray:
    if diagonal:
        return np.where(rng.integers(0, 2, size=n) == 1, 2, -2).astype(np.int8)
    return _SITE_VALUES[rng.integers(0, 4, size=n)]


def _run_lockstep(params, config, n, diagonal, init_configs, stream):
    n_chains = config.n_chains
    burn = config.resolved_burn_in(n)
    thin = config.resolved_thinning(n)
    n_keep = config.n_samples
    total = burn + n_keep * thin

    sites = np.empty((n_chains, total), dtype=np.int64)
    alts = np.empty((n_chains, total), dtype=np.int64) if not diagonal else None
    unifs = np.empty((n_chains, total), dtype=np.float64)
    start = np.empty((n_chains, n), dtype=np.int8)
    for c in range(n_chains):
        rng = np.random.default_rng([config.seed, stream, c])
        if init_configs is None:
            start[c] = _initial_state(rng, n, diagonal)
        else:
            start[c] = validate_configuration(init_configs[c])
        sites[c] = rng.integers(0, n, size=total)
        if alts is not None:
            alts[c] = rng.integers(0, 3, size=total)
        unifs[c] = rng.random(total)

    u_t = np.ascontiguousarray(params.u.T)
    v_t = np.ascontiguousarray(params.v.T)
    w_t = np.ascontiguousarray(params.w.T)
    a1, a2, a3 = params.a1, params.a2, params.a3

    s_int = start.copy()
    s_f = s_int.astype(np.float64)
    theta = params.b[None, :] + s_f @ u_t + (s_f**2) @ v_t + (s_f**3) @ w_t
    log_vis = s_f @ a1 + (s_f**2) @ a2 + (s_f**3) @ a3
    l2c = _log2cosh(theta).sum(axis=1)

    rows = np.arange(n_chains)
    power = 1.0 if diagonal else 2.0
    accepted = np.zeros(n_chains, dtype=np.int64)
    kept = np.empty((n_chains, n_keep, n), dtype=np.int8)
    kept_logs = np.empty((n_chains, n_keep), dtype=np.complex128)

    for t in range(total):
        site = sites[:, t]
        cur = s_int[rows, site].astype(np.float64)
        if diagonal:
            new = -cur
        else:
            idx = _VAL_IDX[s_int[rows, site] + 2]
            new = _SITE_VALUES[(idx + 1 + alts[:, t]) % 4].astype(np.float64)
        d1 = new - cur
        d2 = new * new - cur * cur
        d3 = new**3 - cur**3
        theta_new = theta + u_t[site] * d1[:, None] + v_t[site] * d2[:, None] + w_t[site] * d3[:, None]
        l2c_new = _log2cosh(theta_new).sum(axis=1)
        dvis = a1[site] * d1 + a2[site] * d2 + a3[site] * d3
        dlog_re = (dvis + l2c_new - l2c).real
        acc = unifs[:, t] < np.exp(np.minimum(0.0, power * dlog_re))
        hit = np.flatnonzero(acc)
        if hit.size:
            s_int[hit, site[hit]] = new[hit].astype(np.int8)
            theta[hit] = theta_new[hit]
            l2c[hit] = l2c_new[hit]
            log_vis[hit] += dvis[hit]
            accepted[hit] += 1
        offset = t - burn + 1
        if offset > 0 and offset % thin == 0:
            k = offset // thin - 1
            if k < n_keep:
                kept[:, k, :] = s_int
                kept_logs[:, k] = log_vis + l2c

    return SampleBatch(
        configs=kept.reshape(n_chains * n_keep, n),
        log_amps=kept_logs.reshape(n_chains * n_keep),
        chain_ids=np.repeat(np.arange(n_chains), n_keep),
        acceptance_per_chain=accepted / max(total, 1),
        final_configs=s_int,
    )


def _check_chain_inputs(params, model, init_configs, n_chains):
    if model.n_sites != params.n_visible:
        raise DomainError(
            f"model has {model.n_sites} sites, parameters have {params.n_visible}"
        )
    if init_configs is not None:
        init_configs = np.asarray(init_configs, dtype=np.int8)
        if init_configs.shape != (n_chains, model.n_sites):
            raise DomainError("init_configs must have shape (n_chains, n_sites)")
    return init_configs


def run_chain(params: LdmParameters, model: ModelSpec, config: ChainConfig,
              init_configs=None, stream: int = 0) -> SampleBatch:
    """Sample p(s) ~ |rho(s)|^2. Deterministic given (seed, stream, chain index).

    init_configs, when given, warm-starts each chain (burn-in still runs);
    the optimizer chains steps together this way. stream separates RNG
    streams for repeated calls under one seed.
    """
    init_configs = _check_chain_inputs(params, model, init_configs, config.n_chains)
    return _run_lockstep(params, config, model.n_sites, False, init_configs, stream)


def run_diagonal_chain(params: LdmParameters, model: ModelSpec, config: ChainConfig,
                       init_configs=None, stream: int = 0) -> SampleBatch:
    """Sample diagonal configurations with weight |rho(d)| to the first power."""
    init_configs = _check_chain_inputs(params, model, init_configs, config.n_chains)
    if init_configs is not None and not (np.abs(init_configs) == 2).all():
        raise DomainError("diagonal chains need diagonal start configurations")
    return _run_lockstep(params, config, model.n_sites, True, init_configs, stream)


def gelman_rubin(chains) -> float:
    """R_hat = sqrt(((n-1)/n W + B/n) / W) over per-chain scalar series.

    W is the mean within-chain sample variance, B/n the variance of the
    chain means. Identical chains of copies give sqrt((n-1)/n); values near
    1 indicate the chains agree.
    """
    arr = np.asarray(chains, dtype=np.float64)
    if arr.ndim != 2:
        raise DomainError("expected a 2-d array of shape (n_chains, n_steps)")
    n_chains, n_steps = arr.shape
    if n_chains < 2 or n_steps < 2:
        raise DomainError("need at least 2 chains of length >= 2")
    within = arr.var(axis=1, ddof=1).mean()
    between_over_n = arr.mean(axis=1).var(ddof=1)
    if within == 0.0:
        if between_over_n == 0.0:
            raise DegenerateVarianceError("all chain values are identical; R_hat is undefined")
        return float("inf")
    return float(np.sqrt(((n_steps - 1) / n_steps * within + between_over_n) / within))


def dump_chain_csv(batch: SampleBatch, path) -> None:
    """One row per kept sample: chain id, step within chain, site values."""
    n = batch.configs.shape[1] if batch.configs.size else batch.final_configs.shape[1]
    with open(path, "w") as fh:
        fh.write("chain,step," + ",".join(f"s{i}" for i in range(n)) + "\n")
        step = 0
        prev_chain = -1
        for chain, config in zip(batch.chain_ids, batch.configs):
            step = step + 1 if chain == prev_chain else 0
            prev_chain = chain
            fh.write(f"{chain},{step}," + ",".join(str(int(x)) for x in config) + "\n")
