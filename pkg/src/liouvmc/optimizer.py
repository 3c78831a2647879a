"""Stochastic reconfiguration updates and the optimization driver.

Each step solves the regularized linear system

    (S + lambda I) gamma = eta f

and moves the parameters by gamma. The resulting state change is the
projection of eta * L rho onto the variational manifold, i.e. one short
forward step of the physical evolution exp(t L). Since every non-steady
mode of L decays (Re lambda_i < 0), repeating this contracts onto the
steady state; the opposite sign amplifies those modes instead and runs
away from it. A metric-free step gamma = eta f is provided as a baseline
(sga): same direction, no curvature information, and famously able to
drift toward the trace state that also zeroes the cost.

The driver alternates sampling and updating. With a ChainConfig it uses
Metropolis batches and warm-starts each step's chains from the previous
step's end states; with sampler_cfg=None it enumerates all configurations
and uses exact probabilities (only sensible for small N, but deterministic,
which some tests rely on). It stops at max_steps or once |C|^2 and the
cost variance are both below their thresholds; a low mean with a large
variance is not convergence.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .ansatz import (
    LdmParameters,
    flatten_params,
    log_derivatives_batch,
    unflatten_params,
)
from .errors import DomainError, SampleUnderflowError, SolverFailureError
from .estimators import (
    CostEstimate,
    SrSystem,
    enumerate_probabilities,
    estimate_cost,
    fisher_and_forces,
    local_costs_batch,
)
from .models import ModelSpec
from .sampler import ChainConfig, run_chain

FLAGGED_FRACTION_LIMIT = 0.01


@dataclass
class SrConfig:
    """Update hyperparameters. lam is the diagonal shift added to S."""

    eta: float
    lam: float = 1e-3
    max_steps: int = 1000
    stop_cost: float = 1e-4
    stop_var: float = 1e-2

    def __post_init__(self):
        if not self.eta > 0:
            raise DomainError("eta must be > 0")
        if self.lam < 0:
            raise DomainError("lam must be >= 0")
        if self.max_steps < 0:
            raise DomainError("max_steps must be >= 0")


@dataclass
class OptimizationTrace:
    steps: list = field(default_factory=list)
    cost_abs_sq: list = field(default_factory=list)
    variance: list = field(default_factory=list)
    update_norm: list = field(default_factory=list)
    acceptance: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)

    def append(self, step, cost, norm, acceptance, dt):
        self.steps.append(step)
        self.cost_abs_sq.append(cost.abs_sq)
        self.variance.append(cost.variance)
        self.update_norm.append(norm)
        self.acceptance.append(acceptance)
        self.wall_time.append(dt)

    def __len__(self):
        return len(self.steps)

    def to_csv(self, path) -> None:
        """step, |C|^2, variance, update norm, acceptance. No timing columns,
        so reruns with one seed produce identical bytes."""
        with open(path, "w") as fh:
            fh.write("step,cost_abs_sq,cost_variance,update_norm,acceptance\n")
            for row in zip(self.steps, self.cost_abs_sq, self.variance,
                           self.update_norm, self.acceptance):
                fh.write(f"{row[0]},{row[1]!r},{row[2]!r},{row[3]!r},{row[4]!r}\n")


def sr_update(system: SrSystem, cfg: SrConfig) -> np.ndarray:
    """Solve (S + lam I) gamma = eta f and verify the residual."""
    s_mat = system.fisher
    f = system.forces
    if s_mat.shape != (f.size, f.size):
        raise DomainError("Fisher matrix and forces have mismatched sizes")
    lhs = s_mat + cfg.lam * np.eye(f.size)
    try:
        gamma = np.linalg.solve(lhs, cfg.eta * f)
    except np.linalg.LinAlgError as exc:
        raise SolverFailureError(f"SR solve failed: {exc}") from exc
    residual = float(np.linalg.norm(lhs @ gamma - cfg.eta * f))
    if not np.all(np.isfinite(gamma)) or residual > 1e-8 * (np.linalg.norm(f) + 1.0):
        cond = float(np.linalg.cond(lhs))
        raise SolverFailureError(
            f"SR solve unreliable: residual {residual:.3e}, condition number {cond:.3e}"
        )
    return gamma


def sga_update(system: SrSystem, cfg: SrConfig) -> np.ndarray:
    """Metric-free step in the same direction, the comparison baseline."""
    return cfg.eta * system.forces


_UPDATES = {"sr": sr_update, "sga": sga_update}


def _exact_step(params, model):
    configs, p, _ = enumerate_probabilities(params, model.n_sites)
    o = log_derivatives_batch(params, configs)
    c, flagged = local_costs_batch(params, model, configs)
    cost = estimate_cost(None, c, weights=p, flagged=flagged)
    system = fisher_and_forces(None, o, c, weights=p, flagged=flagged)
    return cost, system, 1.0, None


def _sampled_step(params, model, sampler_cfg, step, warm_state):
    batch = run_chain(params, model, sampler_cfg, init_configs=warm_state, stream=step)
    o = log_derivatives_batch(params, batch.configs)
    c, flagged = local_costs_batch(params, model, batch.configs)
    n_flagged = int(flagged.sum())
    if n_flagged > FLAGGED_FRACTION_LIMIT * flagged.size:
        raise SampleUnderflowError(
            f"{n_flagged} of {flagged.size} samples flagged for underflow at step {step}"
        )
    cost = estimate_cost(batch, c, flagged=flagged)
    system = fisher_and_forces(batch, o, c, flagged=flagged)
    return cost, system, batch.acceptance, batch.final_configs


def run_optimization(model: ModelSpec, params0: LdmParameters,
                     sampler_cfg: ChainConfig | None, sr_cfg: SrConfig,
                     method: str = "sr", on_step=None) -> tuple[LdmParameters, OptimizationTrace]:
    """Minimize |C|^2; returns the final parameters and the per-step trace.

    on_step, when given, is called as on_step(step, params, cost) after each
    estimate with the parameters the estimate was taken at.
    """
    if method not in _UPDATES:
        raise DomainError(f"unknown update method {method!r}; choose from {sorted(_UPDATES)}")
    if model.n_sites != params0.n_visible:
        raise DomainError("model and parameters disagree on the number of sites")
    update = _UPDATES[method]
    params = params0
    trace = OptimizationTrace()
    warm_state = None

    for step in range(sr_cfg.max_steps):
        tic = time.perf_counter()
        if sampler_cfg is None:
            cost, system, acceptance, _ = _exact_step(params, model)
        else:
            cost, system, acceptance, final_configs = _sampled_step(
                params, model, sampler_cfg, step, warm_state)
            if sampler_cfg.warm_start:
                warm_state = final_configs
        if on_step is not None:
            on_step(step, params, cost)
        if cost.abs_sq < sr_cfg.stop_cost and cost.variance < sr_cfg.stop_var:
            trace.append(step, cost, 0.0, acceptance, time.perf_counter() - tic)
            break
        gamma = update(system, sr_cfg)
        params = unflatten_params(flatten_params(params) + gamma,
                                  params.n_visible, params.n_hidden)
        trace.append(step, cost, float(np.linalg.norm(gamma)), acceptance,
                     time.perf_counter() - tic)

    return params, trace
