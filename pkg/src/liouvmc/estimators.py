"""Monte Carlo estimators built on sample batches.

The cost estimate is the sampled mean of the local cost

    C_loc(s) = sum_{s'} <<s|L|s'>> rho(s') / rho(s),

taken over p(s) ~ |rho(s)|^2, so its expectation is <<rho|L|rho>>/<<rho|rho>>.
The same samples give the quantum Fisher matrix S and the forces f through
centred covariances of the holomorphic log-derivative vectors O:

    S_ij = <O_i* O_j> - <O_i*><O_j>,   f_i = <O_i* C_loc> - <O_i*><C_loc>.

C_loc stands in for L inside f; it is L's unbiased local estimator and
makes f vanish at the steady state sample by sample.

Amplitude ratios are exponentiated log differences. A sample whose ratios
would overflow double precision (exponent above ~700, meaning |rho(s)| has
underflowed relative to its neighbors) is flagged and dropped from every
mean; callers watch the flag counter and abort when too many appear.

Physical observables come from diagonal chains: for a diagonal
configuration d sampled with weight |rho(d,d)|, the local estimator is
A_loc(d) = sum_m A_{d,m} rho(pair(m,d)) / rho(pair(d,d)) and the residual
phases w = rho(d,d)/|rho(d,d)| reweight the mean. The real part is the
physical value; the imaginary part is reported as a diagnostic and should
vanish for a Hermitian state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ansatz import LdmParameters, log_rho_batch
from .errors import DomainError, NumericalError, SampleUnderflowError
from .models import ModelSpec, all_configurations, row_arrays, validate_configuration

# largest ratio exponent we are willing to feed to exp()
OVERFLOW_EXPONENT = 700.0

_FLIP_KET_DIAG = {2: -1, -2: 1}


@dataclass
class CostEstimate:
    mean: complex
    abs_sq: float
    variance: float
    n_samples: int


@dataclass
class SrSystem:
    """The quantum Fisher matrix S (fisher) and force vector f (forces)."""

    fisher: np.ndarray
    forces: np.ndarray


@dataclass
class ObservableEstimate:
    value: float
    stderr: float
    imag_residual: float
    n_samples: int
    n_flagged: int


def local_costs_batch(params: LdmParameters, model: ModelSpec, configs) -> tuple[np.ndarray, np.ndarray]:
    """C_loc for every configuration in the batch; returns (values, flagged).

    Duplicate configurations are collapsed before evaluation, which saves a
    lot of work on Metropolis output where repeats are common.
    """
    configs = np.asarray(configs, dtype=np.int8)
    if configs.ndim != 2 or configs.shape[0] == 0:
        raise DomainError("expected a non-empty batch of configurations")
    uniq, inverse = np.unique(configs, axis=0, return_inverse=True)

    rows = [row_arrays(model, uniq[i]) for i in range(uniq.shape[0])]
    counts = np.array([r[0].shape[0] for r in rows])
    targets = np.concatenate([r[0] for r in rows], axis=0)
    amps = np.concatenate([r[1] for r in rows])

    log_den = log_rho_batch(params, uniq)
    log_num = log_rho_batch(params, targets)
    expo = log_num - np.repeat(log_den, counts)

    bad_term = (expo.real > OVERFLOW_EXPONENT) | ~np.isfinite(expo)
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    flagged_u = np.add.reduceat(bad_term.astype(np.int64), offsets) > 0

    terms = amps * np.exp(np.where(bad_term, -np.inf, expo))
    values_u = np.add.reduceat(terms, offsets)
    flagged_u |= ~np.isfinite(values_u)
    return values_u[inverse], flagged_u[inverse]


def local_cost(params: LdmParameters, model: ModelSpec, s) -> complex:
    """C_loc for one configuration; raises when the sample must be flagged."""
    s = validate_configuration(s)
    values, flagged = local_costs_batch(params, model, s[None, :])
    if flagged[0]:
        raise SampleUnderflowError("amplitude underflow at this configuration; sample must be flagged")
    return complex(values[0])


def _select(weights, flagged, n: int):
    """Normalized weights with flagged samples removed; None means uniform."""
    if flagged is None:
        flagged = np.zeros(n, dtype=bool)
    keep = ~np.asarray(flagged, dtype=bool)
    if not keep.any():
        raise DomainError("every sample in the batch is flagged")
    if weights is None:
        w = keep.astype(np.float64)
    else:
        w = np.where(keep, np.asarray(weights, dtype=np.float64), 0.0)
    total = w.sum()
    if total <= 0:
        raise DomainError("total sample weight is zero")
    return w / total, int(n - keep.sum())


def estimate_cost(batch, local_costs, weights=None, flagged=None) -> CostEstimate:
    """Mean, |mean|^2 and population variance of C_loc over the batch.

    weights switches from sample means to exact enumeration sums; batch is
    accepted for interface symmetry and may be None in the weighted mode.
    """
    c = np.asarray(local_costs, dtype=np.complex128)
    if c.size == 0:
        raise DomainError("empty batch")
    w, _ = _select(weights, flagged, c.size)
    mean = complex(np.sum(w * c))
    # extreme local costs from terrible states may overflow the squares;
    # report inf rather than raising, the caller sees a non-converged cost
    with np.errstate(over="ignore"):
        var = float(np.sum(w * np.abs(c - mean) ** 2))
        abs_sq = float(np.abs(np.complex128(mean)) ** 2)
    n_eff = int(np.count_nonzero(w))
    return CostEstimate(mean=mean, abs_sq=abs_sq, variance=var, n_samples=n_eff)


def fisher_and_forces(batch, o_vectors, local_costs, weights=None, flagged=None) -> SrSystem:
    """Centred covariances S and f from log-derivative vectors and local costs."""
    o = np.asarray(o_vectors, dtype=np.complex128)
    c = np.asarray(local_costs, dtype=np.complex128)
    if o.ndim != 2 or o.shape[0] == 0:
        raise DomainError("empty batch")
    if c.shape != (o.shape[0],):
        raise DomainError("one local cost per derivative vector required")
    w, _ = _select(weights, flagged, o.shape[0])
    # centered moments: exact zeros for a single sample and no cancellation
    # between large uncentered terms
    oc = o - (w @ o)[None, :]
    cc = c - complex(w @ c)
    ocw = oc.conj() * w[:, None]
    fisher = ocw.T @ oc
    forces = ocw.T @ cc
    return SrSystem(fisher=fisher, forces=forces)


def enumerate_probabilities(params: LdmParameters, n_sites: int):
    """All configurations with exact p(s) = |rho(s)|^2 / sum |rho|^2.

    The normalization is done on shifted exponents so large log-amplitudes
    cannot overflow. Also returns the log-amplitudes.
    """
    configs = all_configurations(n_sites)
    logs = log_rho_batch(params, configs)
    re = 2.0 * (logs.real - logs.real.max())
    p = np.exp(re)
    return configs, p / p.sum(), logs


_OBSERVABLES = ("identity", "sigma_x", "sigma_z", "sigma_xx", "sigma_zz")


def _observable_sites(name: str, sites, n: int) -> list[int]:
    if name not in _OBSERVABLES:
        raise DomainError(f"unknown operator {name!r}; choose from {_OBSERVABLES}")
    sites = [int(s) for s in (sites if np.iterable(sites) else [sites])]
    need = 0 if name == "identity" else (2 if name in ("sigma_xx", "sigma_zz") else 1)
    if len(sites) != need:
        raise DomainError(f"operator {name} takes {need} site(s), got {len(sites)}")
    for s in sites:
        if not 0 <= s < n:
            raise DomainError(f"site {s} out of range for {n} sites")
    if need == 2 and sites[1] != sites[0] + 1:
        raise DomainError("two-site operators act on adjacent sites (i, i+1)")
    return sites


def estimate_observable(params: LdmParameters, model: ModelSpec, diagonal_batch,
                        operator: str, sites=()) -> ObservableEstimate:
    """Phase-reweighted diagonal-chain estimate of a named operator.

    value = Re[ sum_k w_k A_loc(d_k) / sum_k w_k ], w_k the phase of
    rho(d_k, d_k). The standard error linearizes the ratio of means.
    """
    configs = np.asarray(diagonal_batch.configs if hasattr(diagonal_batch, "configs")
                         else diagonal_batch, dtype=np.int8)
    if configs.ndim != 2 or configs.shape[0] == 0:
        raise DomainError("empty diagonal batch")
    if configs.shape[1] != model.n_sites or model.n_sites != params.n_visible:
        raise DomainError("batch, model and parameters disagree on the number of sites")
    if not (np.abs(configs) == 2).all():
        raise DomainError("observable estimation needs diagonal configurations")
    sites = _observable_sites(operator, sites, model.n_sites)

    n_batch = configs.shape[0]
    log_den = log_rho_batch(params, configs)
    phases = np.exp(1j * log_den.imag)
    flagged = ~np.isfinite(log_den)

    if operator == "identity":
        a_loc = np.ones(n_batch, dtype=np.complex128)
    elif operator in ("sigma_z", "sigma_zz"):
        a_loc = (configs[:, sites].astype(np.float64) / 2.0).prod(axis=1).astype(np.complex128)
    else:  # sigma_x, sigma_xx: flip the ket spin on the involved sites
        targets = configs.copy()
        for i in sites:
            targets[:, i] = np.where(configs[:, i] == 2, -1, 1)
        expo = log_rho_batch(params, targets) - log_den
        flagged |= (expo.real > OVERFLOW_EXPONENT) | ~np.isfinite(expo)
        a_loc = np.exp(np.where(flagged, 0.0, expo))

    keep = ~flagged
    if not keep.any():
        raise SampleUnderflowError("every diagonal sample is flagged")
    w = phases[keep]
    a = a_loc[keep]
    w_mean = w.mean()
    if abs(w_mean) < 1e-12:
        raise NumericalError("diagonal phases cancel; the state is too far from Hermitian")
    ratio = (w * a).mean() / w_mean
    g = (w * (a - ratio) / w_mean).real
    n_kept = g.size
    stderr = float(g.std(ddof=1) / np.sqrt(n_kept)) if n_kept > 1 else 0.0
    return ObservableEstimate(
        value=float(ratio.real), stderr=stderr, imag_residual=float(ratio.imag),
        n_samples=n_kept, n_flagged=int(n_batch - n_kept),
    )
