"""Dense exact-diagonalization reference for small chains.

Everything here is built from explicit Kronecker products of 2x2 matrices,
on purpose: it shares no code with the row generator in models.py, so the
two constructions can be checked against each other. All operations are
dense and guarded to N <= 6 (the Liouvillian is 4^N x 4^N).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ansatz
from .errors import (
    DegenerateSteadyStateError,
    DomainError,
    NumericalError,
    SizeLimitError,
)
from .models import DENSE_SITE_LIMIT, ModelSpec, all_configurations

_ID2 = np.eye(2, dtype=np.complex128)
_SX = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_SZ = np.array([[1, 0], [0, -1]], dtype=np.complex128)
# basis index 0 is spin up, so sigma- lowers |0> to |1>
_SM = np.array([[0, 0], [1, 0]], dtype=np.complex128)

RECONSTRUCT_SITE_LIMIT = 5


@dataclass
class DenseState:
    """A 2^N x 2^N density matrix; positivity and Hermiticity are measured, not assumed."""

    rho: np.ndarray

    @property
    def n_sites(self) -> int:
        return int(round(np.log2(self.rho.shape[0])))


def _kron_chain(ops) -> np.ndarray:
    out = ops[0]
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def _embed(op2: np.ndarray, site: int, n: int) -> np.ndarray:
    return _kron_chain([op2 if i == site else _ID2 for i in range(n)])


def build_hamiltonian(model: ModelSpec) -> np.ndarray:
    """Dense 2^N x 2^N Hamiltonian of the chosen variant."""
    n = model.n_sites
    if n > DENSE_SITE_LIMIT:
        raise SizeLimitError(f"dense Hamiltonian for N = {n} refused (limit N = {DENSE_SITE_LIMIT})")
    dim = 1 << n
    h_mat = np.zeros((dim, dim), dtype=np.complex128)
    bond = _SZ if model.variant == "zz" else _SX
    site_op = _SX if model.variant == "zz" else _SZ
    for i in range(n - 1):
        h_mat += 0.25 * model.coupling * _embed(bond, i, n) @ _embed(bond, i + 1, n)
    for i in range(n):
        h_mat += 0.5 * model.field * _embed(site_op, i, n)
    return h_mat


def jump_operators(model: ModelSpec) -> list:
    """sqrt(gamma) sigma- on every site."""
    n = model.n_sites
    return [np.sqrt(model.gamma) * _embed(_SM, i, n) for i in range(n)]


def liouvillian_matrix(model: ModelSpec) -> np.ndarray:
    """The vectorized generator, assembled by brute force.

    Row-major vectorization: vec(A rho B) = (A kron B^T) vec(rho), hence

        L = -i (H kron 1 - 1 kron H^T)
            + sum_k [ A_k kron conj(A_k)
                      - 1/2 (1 kron (A_k^dag A_k)^T + A_k^dag A_k kron 1) ]
    """
    n = model.n_sites
    if n > DENSE_SITE_LIMIT:
        raise SizeLimitError(f"dense Liouvillian for N = {n} refused (limit N = {DENSE_SITE_LIMIT})")
    h_mat = build_hamiltonian(model)
    dim = h_mat.shape[0]
    eye = np.eye(dim, dtype=np.complex128)
    liou = -1j * (np.kron(h_mat, eye) - np.kron(eye, h_mat.T))
    for a_op in jump_operators(model):
        ada = a_op.conj().T @ a_op
        liou += np.kron(a_op, a_op.conj())
        liou -= 0.5 * (np.kron(eye, ada.T) + np.kron(ada, eye))
    return liou


def steady_state_ed(model: ModelSpec) -> DenseState:
    """Stationary density matrix from a full eigendecomposition of L.

    Takes the eigenvector whose eigenvalue has the largest real part, checks
    that eigenvalue sits at zero, fixes the arbitrary eigenvector phase by
    dividing out the complex trace, then Hermitizes and renormalizes.
    """
    liou = liouvillian_matrix(model)
    eigvals, eigvecs = np.linalg.eig(liou)
    k = int(np.argmax(eigvals.real))
    if abs(eigvals[k]) > 1e-8:
        raise NumericalError(f"no zero eigenvalue found; closest candidate {eigvals[k]:.3e}")
    if int(np.sum(np.abs(eigvals) < 1e-10)) >= 2:
        raise DegenerateSteadyStateError("steady space is degenerate; stationary state is ambiguous")
    dim = 1 << model.n_sites
    rho = eigvecs[:, k].reshape(dim, dim)
    tr = np.trace(rho)
    if abs(tr) < 1e-14:
        raise NumericalError("steady eigenvector is traceless; cannot normalize")
    rho = rho / tr  # also removes the arbitrary global phase
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    return DenseState(rho=rho)


def reconstruct_density(params: ansatz.LdmParameters) -> DenseState:
    """Full density matrix from the ansatz by enumerating all 4^N amplitudes.

    Normalized by its complex trace; deliberately not Hermitized, since how
    close the raw reconstruction comes to a physical state is one of the
    things we measure.
    """
    n = params.n_visible
    if n > RECONSTRUCT_SITE_LIMIT:
        raise SizeLimitError(
            f"amplitude enumeration for N = {n} refused (limit N = {RECONSTRUCT_SITE_LIMIT})"
        )
    configs = all_configurations(n)
    logs = ansatz.log_rho_batch(params, configs)
    amps = np.exp(logs - logs.real.max())
    dim = 1 << n
    rho = amps.reshape(dim, dim)
    tr = np.trace(rho)
    if abs(tr) < 1e-300:
        raise NumericalError("reconstructed state is traceless; cannot normalize")
    return DenseState(rho=rho / tr)


def _validate_partition(partition, n: int) -> np.ndarray:
    part = np.unique(np.asarray(partition, dtype=int))
    if part.size == 0 or part.size >= n:
        raise DomainError("partition must be a nonempty proper subset of the sites")
    if part.min() < 0 or part.max() >= n:
        raise DomainError(f"partition sites out of range for {n} sites")
    return part


def partial_transpose(rho: np.ndarray, partition, n_sites: int) -> np.ndarray:
    """Transpose the ket/bra indices of the given sites only."""
    part = _validate_partition(partition, n_sites)
    tensor = rho.reshape([2] * (2 * n_sites))
    axes = list(range(2 * n_sites))
    for i in part:
        axes[i], axes[n_sites + i] = axes[n_sites + i], axes[i]
    dim = 1 << n_sites
    return tensor.transpose(axes).reshape(dim, dim)


def negativity(state: DenseState, partition) -> float:
    """(trace norm of the partial transpose - 1) / 2."""
    n = state.n_sites
    rho_pt = partial_transpose(state.rho, partition, n)
    trace_norm = float(np.linalg.svd(rho_pt, compute_uv=False).sum())
    return 0.5 * (trace_norm - 1.0)


def purity(state: DenseState) -> float:
    return float(np.trace(state.rho @ state.rho).real)


def physicality_metrics(state: DenseState) -> tuple[float, float, float]:
    """(min real eigenvalue, sum of |imag eigenvalues|, relative hermiticity defect)."""
    rho = state.rho
    eigvals = np.linalg.eigvals(rho)
    defect = float(np.linalg.norm(rho - rho.conj().T) / np.linalg.norm(rho))
    return float(eigvals.real.min()), float(np.abs(eigvals.imag).sum()), defect


FIDELITY_EIG_FLOOR = -5e-2


def _psd_project(rho: np.ndarray) -> np.ndarray:
    """Eigendecompose, clip small negative eigenvalues, renormalize the trace.

    Variationally reconstructed states carry negative eigenvalues on the
    order of the residual training error, and the exact steady states can
    sit arbitrarily close to the PSD boundary themselves, so mild
    negativity has to be tolerated here.  Anything below
    FIDELITY_EIG_FLOOR is treated as a genuinely unphysical state.
    """
    w, u = np.linalg.eigh(rho)
    if w.min() < FIDELITY_EIG_FLOOR:
        raise NumericalError(f"state has eigenvalue {w.min():.3e}; too unphysical for a fidelity")
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    return (u * w) @ u.conj().T


def fidelity(a: DenseState, b: DenseState) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2.

    Both inputs are Hermitized, trace-normalized, and projected onto the
    PSD cone first (eigenvalues in [FIDELITY_EIG_FLOOR, 0) clipped to
    zero, anything lower is an error).
    """
    rho_a = 0.5 * (a.rho + a.rho.conj().T)
    rho_b = 0.5 * (b.rho + b.rho.conj().T)
    if rho_a.shape != rho_b.shape:
        raise DomainError("fidelity inputs must have equal dimensions")
    rho_a = _psd_project(rho_a / np.trace(rho_a).real)
    rho_b = _psd_project(rho_b / np.trace(rho_b).real)
    wa, ua = np.linalg.eigh(rho_a)
    sq = (ua * np.sqrt(np.clip(wa, 0.0, None))) @ ua.conj().T
    w = np.linalg.eigvalsh(sq @ rho_b @ sq)
    root = np.sqrt(np.clip(w, 0.0, None)).sum()
    return float(np.clip(root * root, 0.0, 1.0 + 1e-9))


_DENSE_OPS = {"sigma_x": (_SX,), "sigma_z": (_SZ,), "sigma_xx": (_SX, _SX), "sigma_zz": (_SZ, _SZ)}


def dense_operator(name: str, sites, n_sites: int) -> np.ndarray:
    """One of the named measurement operators as a dense 2^N x 2^N matrix."""
    if name == "identity":
        return np.eye(1 << n_sites, dtype=np.complex128)
    if name not in _DENSE_OPS:
        raise DomainError(f"unknown operator {name!r}")
    factors = _DENSE_OPS[name]
    sites = [int(s) for s in (sites if np.iterable(sites) else [sites])]
    if len(sites) != len(factors):
        raise DomainError(f"operator {name} needs {len(factors)} site(s), got {len(sites)}")
    if any(not 0 <= s < n_sites for s in sites):
        raise DomainError(f"site(s) {sites} out of range for {n_sites} sites")
    if len(sites) == 2 and sites[1] != sites[0] + 1:
        raise DomainError("two-site operators act on adjacent sites (i, i+1)")
    out = _embed(factors[0], sites[0], n_sites)
    for op2, s in zip(factors[1:], sites[1:]):
        out = out @ _embed(op2, s, n_sites)
    return out


def expectation(state: DenseState, name: str, sites=()) -> float:
    """Tr[A rho] for a named operator; the real part is the physical value."""
    op = dense_operator(name, sites, state.n_sites)
    return float(np.trace(op @ state.rho).real)
